use std::cmp::Ordering;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::params::FamilyParams;
use super::poisson::{sample_poisson, sample_zero_truncated_poisson};
use crate::error::{Error, Result};
use crate::interpolant::{dot, Dataset};

/// How `P_n` labels are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// One Gaussian draw with variance `sigma_y2 / Z`.
    #[default]
    ScaledVariance,
    /// Average of `Z` independent conditional draws.
    LiteralAverage,
}

fn fill_marginal<R: Rng + ?Sized>(std_devs: &[f64], rng: &mut R, out: &mut [f64]) {
    for (x, sd) in out.iter_mut().zip(std_devs) {
        let z: f64 = rng.sample(StandardNormal);
        *x = sd * z;
    }
}

fn noise<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    variance.sqrt() * z
}

/// `count` rows from `D_n`: `x ~ N(0, Sigma)` (diagonal), then
/// `y ~ N(theta* . x, sigma_y2)`.
pub fn sample_dn<R: Rng + ?Sized>(params: &FamilyParams, rng: &mut R, count: usize) -> Dataset {
    let d = params.d();
    let sds = params.spectrum().std_devs();
    let mut xs = vec![0.0; count * d];
    let mut ys = Vec::with_capacity(count);
    for row in xs.chunks_exact_mut(d) {
        fill_marginal(&sds, rng, row);
        ys.push(dot(params.theta_star(), row) + noise(params.sigma_y2(), rng));
    }
    Dataset::from_parts(d, xs, ys).expect("buffer sizes agree")
}

/// `count` rows from `P_n`: `x` from the `D_n` marginal, labels averaged
/// over a zero-truncated `Poi(c/b)` number of conditional draws.
pub fn sample_pn<R: Rng + ?Sized>(
    params: &FamilyParams,
    rng: &mut R,
    count: usize,
    mode: LabelMode,
) -> Result<Dataset> {
    let d = params.d();
    let sds = params.spectrum().std_devs();
    let sigma2 = params.sigma_y2();
    let mut xs = vec![0.0; count * d];
    let mut ys = Vec::with_capacity(count);
    for row in xs.chunks_exact_mut(d) {
        fill_marginal(&sds, rng, row);
        let mean = dot(params.theta_star(), row);
        let z = sample_zero_truncated_poisson(params.rate(), rng)?;
        let y = match mode {
            LabelMode::ScaledVariance => mean + noise(sigma2 / z as f64, rng),
            LabelMode::LiteralAverage => {
                let total: f64 = (0..z).map(|_| mean + noise(sigma2, rng)).sum();
                total / z as f64
            }
        };
        ys.push(y);
    }
    Dataset::from_parts(d, xs, ys)
}

/// The finite support `U` of a discrete distribution `Q_n`: `b * n`
/// distinct atoms drawn from the `D_n` marginal.
#[derive(Debug, Clone)]
pub struct SupportSet {
    atoms: Vec<f64>,
    count: usize,
    params: Arc<FamilyParams>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl SupportSet {
    /// Wraps explicit atoms (row-major, `params.d()` per atom). Rejects
    /// an empty set and any exact duplicate.
    pub fn from_atoms(params: Arc<FamilyParams>, atoms: Vec<f64>) -> Result<Self> {
        let d = params.d();
        if atoms.is_empty() || !atoms.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: atoms.len(),
            });
        }
        let count = atoms.len() / d;
        let atom = |i: usize| &atoms[i * d..(i + 1) * d];
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by(|&i, &j| lex_cmp(atom(i), atom(j)));
        for w in order.windows(2) {
            if atom(w[0]).iter().zip(atom(w[1])).all(|(a, b)| a.to_bits() == b.to_bits()) {
                return Err(Error::SupportCollision(w[0].min(w[1]), w[0].max(w[1])));
            }
        }
        Ok(Self {
            atoms,
            count,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dim(&self) -> usize {
        self.params.d()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.atoms[i * d..(i + 1) * d]
    }

    pub fn atoms(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.atoms.chunks_exact(self.dim())
    }

    pub fn params(&self) -> &FamilyParams {
        &self.params
    }

    /// Conditional label means `theta* . u` for every atom.
    pub fn label_means(&self) -> Vec<f64> {
        self.atoms().map(|u| dot(self.params.theta_star(), u)).collect()
    }

    /// A copy with coordinate `axis` of every atom multiplied by `factor`.
    pub fn scale_coordinate(&self, axis: usize, factor: f64) -> Result<Self> {
        if axis >= self.dim() {
            return Err(Error::domain(format!("axis {axis} out of range")));
        }
        let mut atoms = self.atoms.clone();
        for u in atoms.chunks_exact_mut(self.dim()) {
            u[axis] *= factor;
        }
        Self::from_atoms(self.params.clone(), atoms)
    }

    /// The atoms as a dataset labelled by their conditional means.
    pub fn to_dataset(&self) -> Dataset {
        Dataset::from_parts(self.dim(), self.atoms.clone(), self.label_means())
            .expect("buffer sizes agree")
    }
}

/// Draws the support of a random `Q_n`.
pub fn draw_qn_support<R: Rng + ?Sized>(params: &FamilyParams, rng: &mut R) -> Result<SupportSet> {
    draw_qn_support_shared(Arc::new(params.clone()), rng)
}

/// As [`draw_qn_support`], reusing an already shared parameter set.
pub fn draw_qn_support_shared<R: Rng + ?Sized>(
    params: Arc<FamilyParams>,
    rng: &mut R,
) -> Result<SupportSet> {
    let d = params.d();
    let m = params.support_size();
    let sds = params.spectrum().std_devs();
    let mut atoms = vec![0.0; m * d];
    for row in atoms.chunks_exact_mut(d) {
        fill_marginal(&sds, rng, row);
    }
    SupportSet::from_atoms(params, atoms)
}

/// `count` rows from `Q_n`: uniform atom, fresh conditional label.
pub fn sample_qn<R: Rng + ?Sized>(support: &SupportSet, rng: &mut R, count: usize) -> Dataset {
    let (_, rows) = sample_qn_indexed(support, rng, count);
    rows
}

/// As [`sample_qn`], also returning the atom index of every row.
pub fn sample_qn_indexed<R: Rng + ?Sized>(
    support: &SupportSet,
    rng: &mut R,
    count: usize,
) -> (Vec<usize>, Dataset) {
    let d = support.dim();
    let sigma2 = support.params().sigma_y2();
    let theta_star = support.params().theta_star();
    let mut picks = Vec::with_capacity(count);
    let mut data = Dataset::with_capacity(d, count);
    for _ in 0..count {
        let i = rng.random_range(0..support.len());
        let u = support.atom(i);
        let y = dot(theta_star, u) + noise(sigma2, rng);
        data.push(u, y).expect("atom has support dimension");
        picks.push(i);
    }
    (picks, data)
}

/// A Poissonized `Q_n` sample: `t ~ Poi(c n)` rows.
pub fn sample_qn_poissonized<R: Rng + ?Sized>(
    support: &SupportSet,
    rng: &mut R,
) -> Result<(Vec<usize>, Dataset)> {
    let t = sample_poisson(support.params().poisson_mean(), rng)? as usize;
    Ok(sample_qn_indexed(support, rng, t))
}

/// Throws `t ~ Poi(mean_total)` balls uniformly into `m_bins` bins and
/// returns the per-bin counts.
pub fn poissonized_balls_in_bins<R: Rng + ?Sized>(
    mean_total: f64,
    m_bins: usize,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if m_bins == 0 {
        return Err(Error::domain("need at least one bin"));
    }
    let t = sample_poisson(mean_total, rng)?;
    let mut counts = vec![0u64; m_bins];
    for _ in 0..t {
        counts[rng.random_range(0..m_bins)] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::params::FamilyOptions;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn support_counts() {
        let p = FamilyParams::standard(4).unwrap();
        let s = draw_qn_support(&p, &mut rng(1)).unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.atoms().all(|u| u.len() == 16));
    }

    #[test]
    fn different_streams_give_different_supports() {
        let p = FamilyParams::standard(4).unwrap();
        let a = draw_qn_support(&p, &mut rng(1)).unwrap();
        let b = draw_qn_support(&p, &mut rng(2)).unwrap();
        assert_ne!(a.atom(0), b.atom(0));
    }

    #[test]
    fn duplicate_atoms_are_rejected() {
        let p = Arc::new(FamilyParams::standard(4).unwrap());
        let mut atoms = vec![0.5; 32];
        atoms[0] = 1.0;
        atoms[16] = 1.0;
        assert!(matches!(
            SupportSet::from_atoms(p, atoms),
            Err(Error::SupportCollision(0, 1))
        ));
    }

    #[test]
    fn noiseless_labels_are_exact() {
        let opts = FamilyOptions {
            sigma_y2: 0.0,
            ..Default::default()
        };
        let p = FamilyParams::new(16, opts).unwrap();
        let data = sample_dn(&p, &mut rng(4), 50);
        for (x, y) in data.rows() {
            assert_eq!(y, x[0]);
        }
        let pn = sample_pn(&p, &mut rng(4), 50, LabelMode::ScaledVariance).unwrap();
        for (x, y) in pn.rows() {
            assert_eq!(y, x[0]);
        }
    }

    #[test]
    fn empty_qn_sample() {
        let p = FamilyParams::standard(4).unwrap();
        let s = draw_qn_support(&p, &mut rng(1)).unwrap();
        assert!(sample_qn(&s, &mut rng(2), 0).is_empty());
    }

    #[test]
    fn single_bin_holds_every_ball() {
        let mut r = rng(9);
        let counts = poissonized_balls_in_bins(50.0, 1, &mut r).unwrap();
        let mut r2 = rng(9);
        assert_eq!(counts[0], sample_poisson(50.0, &mut r2).unwrap());
        assert!(poissonized_balls_in_bins(5.0, 0, &mut r).is_err());
    }

    #[test]
    fn samplers_are_reproducible() {
        let p = FamilyParams::standard(9).unwrap();
        let a = sample_pn(&p, &mut rng(5), 10, LabelMode::ScaledVariance).unwrap();
        let b = sample_pn(&p, &mut rng(5), 10, LabelMode::ScaledVariance).unwrap();
        assert_eq!(a, b);
        let sa = draw_qn_support(&p, &mut rng(6)).unwrap();
        let sb = draw_qn_support(&p, &mut rng(6)).unwrap();
        assert_eq!(sample_qn(&sa, &mut rng(7), 30), sample_qn(&sb, &mut rng(7), 30));
    }

    #[test]
    fn scaling_a_coordinate() {
        let p = FamilyParams::standard(4).unwrap();
        let s = draw_qn_support(&p, &mut rng(1)).unwrap();
        let t = s.scale_coordinate(0, 9.0).unwrap();
        assert_eq!(t.atom(3)[0], 9.0 * s.atom(3)[0]);
        assert_eq!(t.atom(3)[1], s.atom(3)[1]);
        assert!(s.scale_coordinate(16, 2.0).is_err());
    }
}
