//! Synthetic data for the three simulation studies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GfiError, Result};
use crate::numerics::rng::gaussian_from;
use crate::numerics::{gaussian, orthonormal_columns, DenseMatrix, RandomStream};
use crate::tensor::{cp_compose, CpFactors, DenseTensor};

/// Three-block stochastic block model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub n: usize,
    pub p_w: f64,
    pub p_b: f64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % 3 != 0 {
            return Err(GfiError::InvalidInput(format!(
                "SBM size must be a positive multiple of 3, got {}",
                self.n
            )));
        }
        if !(0.0 <= self.p_b && self.p_b <= self.p_w && self.p_w <= 1.0) {
            return Err(GfiError::InvalidInput(format!(
                "need 0 <= p_b <= p_w <= 1, got p_b = {}, p_w = {}",
                self.p_b, self.p_w
            )));
        }
        Ok(())
    }

    pub fn block_of(&self, node: usize) -> usize {
        node / (self.n / 3)
    }
}

/// Symmetric hollow 0/1 adjacency matrix.
pub fn gen_sbm(spec: &SbmSpec, stream: &RandomStream) -> Result<DenseMatrix> {
    spec.validate()?;
    let mut rng = stream.rng();
    let n = spec.n;
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if spec.block_of(i) == spec.block_of(j) {
                spec.p_w
            } else {
                spec.p_b
            };
            if rng.random::<f64>() < p {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    Ok(a)
}

/// Two `n x R` matrices with orthonormal columns.
pub fn gen_orthonormal_factors(
    n: usize,
    rank: usize,
    stream: &RandomStream,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if rank == 0 || rank > n {
        return Err(GfiError::InvalidInput(format!(
            "need 1 <= R <= n, got R = {rank}, n = {n}"
        )));
    }
    let mut rng = stream.rng();
    let ga = DenseMatrix::from_vec(n, rank, gaussian_from(&mut rng, n * rank, 1.0)?);
    let gb = DenseMatrix::from_vec(n, rank, gaussian_from(&mut rng, n * rank, 1.0)?);
    Ok((orthonormal_columns(&ga), orthonormal_columns(&gb)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    /// Sum of three outer products of 0/1 segment indicators.
    RankExact,
    /// Rectangles and a disk with piecewise constant values.
    Shapes,
    /// Smooth field without zero pixels.
    DenseImage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub nonzero: usize,
    pub total: usize,
    /// Percentage of non-zero entries.
    pub percent: f64,
}

impl SparsityReport {
    pub fn of(t: &DenseTensor) -> Self {
        let nonzero = t.data.iter().filter(|v| **v != 0.0).count();
        let total = t.data.len();
        Self {
            nonzero,
            total,
            percent: 100.0 * nonzero as f64 / total as f64,
        }
    }
}

/// Options for the `Shapes` image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapesSpec {
    pub rectangles: usize,
    pub disk: bool,
}

impl Default for ShapesSpec {
    fn default() -> Self {
        Self {
            rectangles: 2,
            disk: true,
        }
    }
}

pub fn gen_tensor_coefficient(
    kind: ImageKind,
    shape: &[usize],
    stream: &RandomStream,
) -> Result<(DenseTensor, SparsityReport)> {
    gen_tensor_coefficient_with(kind, shape, ShapesSpec::default(), stream)
}

pub fn gen_tensor_coefficient_with(
    kind: ImageKind,
    shape: &[usize],
    shapes: ShapesSpec,
    stream: &RandomStream,
) -> Result<(DenseTensor, SparsityReport)> {
    if shape.len() != 2 || shape.iter().any(|&p| p < 2) {
        return Err(GfiError::InvalidInput(format!(
            "coefficient images must be 2-way with sides >= 2, got {shape:?}"
        )));
    }
    let (p1, p2) = (shape[0], shape[1]);
    let mut rng = stream.rng();
    let tensor = match kind {
        ImageKind::RankExact => {
            let rank = 3;
            let mut segment = |p: usize| -> Vec<f64> {
                let len = rng.random_range((p / 4).max(1)..=(p / 2).max(1));
                let start = rng.random_range(0..=p - len);
                (0..p)
                    .map(|i| {
                        if (start..start + len).contains(&i) {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            };
            let mut f1 = DenseMatrix::zeros(p1, rank);
            let mut f2 = DenseMatrix::zeros(p2, rank);
            for r in 0..rank {
                f1.set_column(r, &DenseMatrix::from_vec(p1, 1, segment(p1)).column(0));
                f2.set_column(r, &DenseMatrix::from_vec(p2, 1, segment(p2)).column(0));
            }
            cp_compose(&CpFactors::new(vec![f1, f2])?)
        }
        ImageKind::Shapes => {
            let mut t = DenseTensor::zeros(shape);
            for _ in 0..shapes.rectangles {
                let h = rng.random_range(2..=(p1 / 3).max(2));
                let w = rng.random_range(2..=(p2 / 3).max(2));
                let i0 = rng.random_range(0..=p1 - h);
                let j0 = rng.random_range(0..=p2 - w);
                let value = rng.random_range(0.5..1.5);
                for i in i0..i0 + h {
                    for j in j0..j0 + w {
                        t.data[i + p1 * j] = value;
                    }
                }
            }
            if shapes.disk {
                let radius = p1.min(p2) as f64 / 5.0;
                let ci = rng.random_range(radius..p1 as f64 - radius);
                let cj = rng.random_range(radius..p2 as f64 - radius);
                let value = rng.random_range(0.5..1.5);
                for i in 0..p1 {
                    for j in 0..p2 {
                        let (di, dj) = (i as f64 + 0.5 - ci, j as f64 + 0.5 - cj);
                        if di * di + dj * dj <= radius * radius {
                            t.data[i + p1 * j] = value;
                        }
                    }
                }
            }
            t
        }
        ImageKind::DenseImage => {
            let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.1..0.3),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            let mut t = DenseTensor::zeros(shape);
            for i in 0..p1 {
                for j in 0..p2 {
                    let (x, y) = ((i as f64 + 0.5) / p1 as f64, (j as f64 + 0.5) / p2 as f64);
                    let mut v = 0.2 + 0.1 * (std::f64::consts::PI * (x + y)).cos();
                    for &(bx, by, s, a) in &bumps {
                        v += a * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * s * s)).exp();
                    }
                    if v == 0.0 {
                        v = 1e-3;
                    }
                    t.data[i + p1 * j] = v;
                }
            }
            t
        }
    };
    let report = SparsityReport::of(&tensor);
    Ok((tensor, report))
}

/// Block means of the individual effects.
pub const DEFAULT_ETA_MEANS: [f64; 3] = [-1.0, 0.0, 1.0];

/// `beta ~ N(1, I_p)` and `alpha_i ~ N(eta_{block(i)}, s^2)`.
pub fn gen_nr_truth(
    n: usize,
    p: usize,
    s: f64,
    eta_means: [f64; 3],
    stream: &RandomStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n % 3 != 0 {
        return Err(GfiError::InvalidInput(format!(
            "node count must be a positive multiple of 3, got {n}"
        )));
    }
    if s < 0.0 {
        return Err(GfiError::InvalidInput(format!(
            "s must be nonnegative, got {s}"
        )));
    }
    let mut rng = stream.rng();
    let beta: Vec<f64> = gaussian_from(&mut rng, p, 1.0)?
        .into_iter()
        .map(|z| 1.0 + z)
        .collect();
    let alpha: Vec<f64> = (0..n)
        .map(|i| {
            let z = if s > 0.0 {
                s * crate::numerics::rng::standard_normal(&mut rng)
            } else {
                0.0
            };
            eta_means[i / (n / 3)] + z
        })
        .collect();
    Ok((alpha, beta))
}

/// `n x p` standard normal design with exactly centered columns.
pub fn gen_centered_design(n: usize, p: usize, stream: &RandomStream) -> Result<DenseMatrix> {
    let mut x = DenseMatrix::from_vec(n, p, gaussian(stream, n * p, 1.0)?);
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(x)
}

/// Each of the `rows x cols` entries is observed independently with probability `p`.
pub fn gen_omega(
    rows: usize,
    cols: usize,
    p: f64,
    stream: &RandomStream,
) -> Result<Vec<(usize, usize)>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GfiError::InvalidInput(format!(
            "observation probability must lie in [0, 1], got {p}"
        )));
    }
    let mut rng = stream.rng();
    let mut omega = Vec::new();
    for j in 0..cols {
        for i in 0..rows {
            if rng.random::<f64>() < p {
                omega.push((i, j));
            }
        }
    }
    Ok(omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SvdResult;

    #[test]
    fn sbm_extremes() {
        let full = gen_sbm(
            &SbmSpec {
                n: 9,
                p_w: 1.0,
                p_b: 0.0,
            },
            &RandomStream::new(1, 0),
        )
        .unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let expect = if i != j && i / 3 == j / 3 { 1.0 } else { 0.0 };
                assert_eq!(full[(i, j)], expect);
            }
        }
        let empty = gen_sbm(
            &SbmSpec {
                n: 9,
                p_w: 0.0,
                p_b: 0.0,
            },
            &RandomStream::new(1, 0),
        )
        .unwrap();
        assert_eq!(empty.amax(), 0.0);
        assert!(gen_sbm(
            &SbmSpec {
                n: 10,
                p_w: 0.5,
                p_b: 0.1
            },
            &RandomStream::new(1, 0)
        )
        .is_err());
        assert!(gen_sbm(
            &SbmSpec {
                n: 9,
                p_w: 0.1,
                p_b: 0.5
            },
            &RandomStream::new(1, 0)
        )
        .is_err());
    }

    #[test]
    fn sbm_within_block_density() {
        let spec = SbmSpec {
            n: 300,
            p_w: 0.2,
            p_b: 0.01,
        };
        let pairs_per_graph = 3.0 * (100.0 * 99.0 / 2.0);
        let mut total = 0.0;
        for g in 0..50 {
            let a = gen_sbm(&spec, &RandomStream::new(7, g)).unwrap();
            let mut edges = 0.0;
            for i in 0..300 {
                for j in (i + 1)..300 {
                    if i / 100 == j / 100 {
                        edges += a[(i, j)];
                    }
                }
            }
            total += edges;
            assert_eq!(a, a.transpose());
            assert!((0..300).all(|i| a[(i, i)] == 0.0));
        }
        let trials: f64 = 50.0 * pairs_per_graph;
        let se = (0.2 * 0.8 / trials).sqrt();
        assert!((total / trials - 0.2).abs() < 3.0 * se);
    }

    #[test]
    fn orthonormal_factors() {
        let (a, b) = gen_orthonormal_factors(20, 3, &RandomStream::new(2, 0)).unwrap();
        assert!((a.tr_mul(&a) - DenseMatrix::identity(3, 3)).amax() < 1e-10);
        assert!((b.tr_mul(&b) - DenseMatrix::identity(3, 3)).amax() < 1e-10);
        let svd = SvdResult::of(&(&a * b.transpose())).unwrap();
        assert_eq!(svd.numerical_rank(1e-8), 3);
        let (q, _) = gen_orthonormal_factors(5, 5, &RandomStream::new(2, 1)).unwrap();
        assert!((q.transpose() * &q - DenseMatrix::identity(5, 5)).amax() < 1e-10);
    }

    #[test]
    fn rank_exact_image() {
        for seed in 0..5 {
            let (t, rep) = gen_tensor_coefficient(
                ImageKind::RankExact,
                &[16, 16],
                &RandomStream::new(seed, 0),
            )
            .unwrap();
            let svd = SvdResult::of(&t.to_matrix().unwrap()).unwrap();
            assert!(svd.numerical_rank(1e-10) <= 3);
            assert_eq!(rep.nonzero, t.data.iter().filter(|v| **v != 0.0).count());
            assert!(rep.percent > 0.0 && rep.percent < 100.0);
        }
    }

    #[test]
    fn empty_shapes_image() {
        let spec = ShapesSpec {
            rectangles: 0,
            disk: false,
        };
        let (t, rep) =
            gen_tensor_coefficient_with(ImageKind::Shapes, &[8, 8], spec, &RandomStream::new(0, 0))
                .unwrap();
        assert!(t.data.iter().all(|&v| v == 0.0));
        assert_eq!(rep.percent, 0.0);
    }

    #[test]
    fn dense_image_report() {
        let (t, rep) =
            gen_tensor_coefficient(ImageKind::DenseImage, &[12, 10], &RandomStream::new(3, 0))
                .unwrap();
        assert_eq!(rep.total, 120);
        assert_eq!(rep.nonzero as f64 / 120.0, t.nonzero_fraction());
        let (s, srep) =
            gen_tensor_coefficient(ImageKind::Shapes, &[16, 16], &RandomStream::new(3, 0)).unwrap();
        assert_eq!(srep.nonzero as f64 / 256.0, s.nonzero_fraction());
    }

    #[test]
    fn network_truth() {
        let (alpha, beta) =
            gen_nr_truth(9, 0, 0.0, DEFAULT_ETA_MEANS, &RandomStream::new(4, 0)).unwrap();
        assert!(beta.is_empty());
        assert_eq!(alpha, vec![-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let (_, beta) =
            gen_nr_truth(9, 4, 0.0, DEFAULT_ETA_MEANS, &RandomStream::new(4, 0)).unwrap();
        assert_eq!(beta.len(), 4);
    }

    #[test]
    fn generators_are_deterministic() {
        let s = RandomStream::new(11, 3);
        assert_eq!(
            gen_omega(10, 10, 0.3, &s).unwrap(),
            gen_omega(10, 10, 0.3, &s).unwrap()
        );
        assert_eq!(
            gen_centered_design(10, 3, &s).unwrap(),
            gen_centered_design(10, 3, &s).unwrap()
        );
        let x = gen_centered_design(30, 3, &s).unwrap();
        for col in x.column_iter() {
            assert!(col.mean().abs() < 1e-12);
        }
    }
}
