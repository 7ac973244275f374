//! Deterministic synthetic continual task streams.
//!
//! A suite of `K` tasks over `d_in`-dimensional inputs is generated from a
//! single master seed. Global class means are drawn once from `N(0, I)`;
//! each task owns a disjoint block of `C` class ids and a random orthogonal
//! rotation, and its samples are `x = R_t (mu_c + sigma * eps)`. Tasks thus
//! share input statistics but differ in decision geometry.
//!
//! The base (pretraining) dataset covers all `K*C` classes with the identity
//! rotation and its own sample stream, so the frozen head is usable by every
//! task but optimal for none.
//!
//! Draw order from the master stream: class means, then the `K` rotations,
//! then one `u64` for the base-data seed, then per-task train and test
//! samples in task order. Regenerating from the same seed is bit-identical.

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, orthogonal_matrix, Matrix, Rng};
use crate::persist::{atomic_write, check_crc, ByteReader, ByteWriter};
use std::ops::Range;
use std::path::Path;

/// Magic bytes of the suite file.
pub const SUITE_MAGIC: &[u8; 4] = b"LLTS";
/// Suite format version.
pub const SUITE_VERSION: u16 = 1;

/// Labeled sample set; samples are columns of `x` (shape `d_in x n`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One task of the stream.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub task_id: usize,
    /// Global class ids `[t*C, (t+1)*C)`; ranges of distinct tasks are disjoint.
    pub class_range: Range<usize>,
    /// Per-class mean vectors, one row per class in range order (`C x d_in`).
    pub means: Matrix,
    /// Class covariance scale.
    pub sigma: f64,
    /// Orthogonal `d_in x d_in` rotation applied to this task's samples.
    pub rotation: Matrix,
    pub train: Dataset,
    pub test: Dataset,
}

/// Parameters a suite is generated from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteParams {
    pub d_in: usize,
    /// Number of tasks `K`.
    pub tasks: usize,
    /// Classes per task `C`.
    pub classes_per_task: usize,
    /// Training samples per class; the test count is fixed at `n/2` by the
    /// file format.
    pub train_per_class: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl SuiteParams {
    fn validate(&self) -> Result<()> {
        if self.tasks < 1 {
            return Err(Error::Config("suite needs at least one task".into()));
        }
        if self.classes_per_task < 2 {
            return Err(Error::Config(
                "suite needs at least two classes per task".into(),
            ));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.d_in == 0 {
            return Err(Error::Config("d_in must be positive".into()));
        }
        if self.train_per_class < 2 {
            return Err(Error::Config(
                "need at least two training samples per class".into(),
            ));
        }
        Ok(())
    }

    pub fn total_classes(&self) -> usize {
        self.tasks * self.classes_per_task
    }

    pub fn test_per_class(&self) -> usize {
        self.train_per_class / 2
    }
}

/// Seeded synthetic continual task stream plus the base pretraining split.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSuite {
    pub params: SuiteParams,
    /// All `K*C` class means, one row per global class id.
    pub means: Matrix,
    pub tasks: Vec<TaskSpec>,
    pub base_train: Dataset,
    pub base_test: Dataset,
}

impl TaskSuite {
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn total_classes(&self) -> usize {
        self.params.total_classes()
    }
}

#[allow(clippy::too_many_arguments)]
fn sample_class(
    rng: &mut Rng,
    mean: &[f64],
    sigma: f64,
    rotation: Option<&Matrix>,
    count: usize,
    label: usize,
    xs: &mut Vec<f64>,
    labels: &mut Vec<usize>,
) -> Result<()> {
    let d = mean.len();
    for _ in 0..count {
        let mut v: Vec<f64> = (0..d).map(|i| mean[i] + sigma * rng.normal()).collect();
        if let Some(r) = rotation {
            let col = Matrix::from_vec(d, 1, v)?;
            v = r.matmul(&col)?.data().to_vec();
        }
        xs.extend_from_slice(&v);
        labels.push(label);
    }
    Ok(())
}

/// Assemble a dataset from sample-major storage (each sample's `d_in` floats
/// contiguous) into the column-major `Dataset` matrix.
fn dataset_from_samples(d_in: usize, xs: &[f64], labels: Vec<usize>) -> Result<Dataset> {
    let n = labels.len();
    if xs.len() != n * d_in {
        return Err(Error::Shape(format!(
            "sample buffer holds {} floats, expected {}",
            xs.len(),
            n * d_in
        )));
    }
    let mut x = Matrix::zeros(d_in, n.max(1))?;
    for (s, chunk) in xs.chunks_exact(d_in).enumerate() {
        for (i, &v) in chunk.iter().enumerate() {
            x.set(i, s, v);
        }
    }
    Ok(Dataset { x, labels })
}

/// Generate a suite from its parameters; bit-identical for equal parameters.
pub fn generate_suite(params: SuiteParams) -> Result<TaskSuite> {
    params.validate()?;
    let mut rng = Rng::from_seed(params.seed);
    let total = params.total_classes();
    let d = params.d_in;

    let means = gaussian_matrix(&mut rng, total, d, 1.0)?;
    let rotations: Vec<Matrix> = (0..params.tasks)
        .map(|_| orthogonal_matrix(&mut rng, d))
        .collect::<Result<_>>()?;

    // Base split: all classes, identity rotation, its own stream.
    let base_seed = rng.next_u64();
    let mut base_rng = Rng::from_seed(base_seed);
    let (mut bx, mut blab) = (Vec::new(), Vec::new());
    for c in 0..total {
        let mean: Vec<f64> = (0..d).map(|i| means.get(c, i)).collect();
        sample_class(
            &mut base_rng,
            &mean,
            params.sigma,
            None,
            params.train_per_class,
            c,
            &mut bx,
            &mut blab,
        )?;
    }
    let base_train = dataset_from_samples(d, &bx, blab)?;
    let (mut bx, mut blab) = (Vec::new(), Vec::new());
    for c in 0..total {
        let mean: Vec<f64> = (0..d).map(|i| means.get(c, i)).collect();
        sample_class(
            &mut base_rng,
            &mean,
            params.sigma,
            None,
            params.test_per_class(),
            c,
            &mut bx,
            &mut blab,
        )?;
    }
    let base_test = dataset_from_samples(d, &bx, blab)?;

    let mut tasks = Vec::with_capacity(params.tasks);
    for (t, rotation) in rotations.into_iter().enumerate() {
        let range = t * params.classes_per_task..(t + 1) * params.classes_per_task;
        let mut task_means = Matrix::zeros(params.classes_per_task, d)?;
        for (row, c) in range.clone().enumerate() {
            for i in 0..d {
                task_means.set(row, i, means.get(c, i));
            }
        }
        let (mut xs, mut labels) = (Vec::new(), Vec::new());
        for c in range.clone() {
            let mean: Vec<f64> = (0..d).map(|i| means.get(c, i)).collect();
            sample_class(
                &mut rng,
                &mean,
                params.sigma,
                Some(&rotation),
                params.train_per_class,
                c,
                &mut xs,
                &mut labels,
            )?;
        }
        let train = dataset_from_samples(d, &xs, labels)?;
        let (mut xs, mut labels) = (Vec::new(), Vec::new());
        for c in range.clone() {
            let mean: Vec<f64> = (0..d).map(|i| means.get(c, i)).collect();
            sample_class(
                &mut rng,
                &mean,
                params.sigma,
                Some(&rotation),
                params.test_per_class(),
                c,
                &mut xs,
                &mut labels,
            )?;
        }
        let test = dataset_from_samples(d, &xs, labels)?;
        tasks.push(TaskSpec {
            task_id: t,
            class_range: range,
            means: task_means,
            sigma: params.sigma,
            rotation,
            train,
            test,
        });
    }

    Ok(TaskSuite {
        params,
        means,
        tasks,
        base_train,
        base_test,
    })
}

fn put_dataset(w: &mut ByteWriter, ds: &Dataset) {
    // Sample-major: each sample's d_in floats contiguous, samples in order.
    for s in 0..ds.len() {
        for i in 0..ds.x.rows() {
            w.put_f64(ds.x.get(i, s));
        }
    }
}

fn put_dataset_labels(w: &mut ByteWriter, ds: &Dataset) {
    for &l in &ds.labels {
        w.put_u32(l as u32);
    }
}

/// Serialize a suite: `LLTS` header (version u16, d_in u32, K u32, C u32,
/// n u32, seed u64), the f64 section (sigma first, then means, rotations,
/// base train/test samples, per-task train/test samples), the u32 labels in
/// the same dataset order, and the trailing CRC32.
pub fn suite_to_bytes(suite: &TaskSuite) -> Vec<u8> {
    let p = &suite.params;
    let mut w = ByteWriter::new();
    w.put_bytes(SUITE_MAGIC);
    w.put_u16(SUITE_VERSION);
    w.put_u32(p.d_in as u32);
    w.put_u32(p.tasks as u32);
    w.put_u32(p.classes_per_task as u32);
    w.put_u32(p.train_per_class as u32);
    w.put_u64(p.seed);

    w.put_f64(p.sigma);
    for &v in suite.means.data() {
        w.put_f64(v);
    }
    for t in &suite.tasks {
        for &v in t.rotation.data() {
            w.put_f64(v);
        }
    }
    put_dataset(&mut w, &suite.base_train);
    put_dataset(&mut w, &suite.base_test);
    for t in &suite.tasks {
        put_dataset(&mut w, &t.train);
        put_dataset(&mut w, &t.test);
    }

    put_dataset_labels(&mut w, &suite.base_train);
    put_dataset_labels(&mut w, &suite.base_test);
    for t in &suite.tasks {
        put_dataset_labels(&mut w, &t.train);
        put_dataset_labels(&mut w, &t.test);
    }
    w.finish_with_crc()
}

fn get_samples(r: &mut ByteReader, d: usize, n: usize, what: &str) -> Result<Vec<f64>> {
    let mut xs = Vec::with_capacity(d * n);
    for _ in 0..d * n {
        xs.push(r.get_f64(what)?);
    }
    Ok(xs)
}

fn get_labels(
    r: &mut ByteReader,
    n: usize,
    total_classes: usize,
    what: &str,
) -> Result<Vec<usize>> {
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let off = r.offset();
        let l = r.get_u32(what)? as usize;
        if l >= total_classes {
            return Err(Error::Parse {
                offset: off,
                msg: format!("label {l} out of range for {total_classes} classes"),
            });
        }
        labels.push(l);
    }
    Ok(labels)
}

/// Parse a suite file; the whole file is validated (CRC first) before any
/// structure is built, so a malformed file never yields a partial suite.
pub fn suite_from_bytes(bytes: &[u8]) -> Result<TaskSuite> {
    let payload = check_crc(bytes, "task suite")?;
    let mut r = ByteReader::new(payload);
    let magic = r.get_bytes(4, "magic")?;
    if magic != SUITE_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            msg: format!("bad magic {magic:?}, expected {SUITE_MAGIC:?}"),
        });
    }
    let version = r.get_u16("version")?;
    if version != SUITE_VERSION {
        return Err(Error::Parse {
            offset: r.offset() - 2,
            msg: format!("unsupported suite version {version}"),
        });
    }
    let d_in = r.get_u32("d_in")? as usize;
    let tasks = r.get_u32("task count")? as usize;
    let classes_per_task = r.get_u32("classes per task")? as usize;
    let train_per_class = r.get_u32("train per class")? as usize;
    let seed = r.get_u64("seed")?;
    let sigma = r.get_f64("sigma")?;
    let params = SuiteParams {
        d_in,
        tasks,
        classes_per_task,
        train_per_class,
        sigma,
        seed,
    };
    params.validate().map_err(|e| Error::Parse {
        offset: 0,
        msg: format!("invalid header: {e}"),
    })?;
    let total = params.total_classes();
    let test_per_class = params.test_per_class();

    let means_data = get_samples(&mut r, d_in, total, "class means")?;
    let means = Matrix::from_vec(total, d_in, means_data)?;

    let mut rotations = Vec::with_capacity(tasks);
    for _ in 0..tasks {
        let data = get_samples(&mut r, d_in, d_in, "rotation")?;
        rotations.push(Matrix::from_vec(d_in, d_in, data)?);
    }

    let base_train_x = get_samples(&mut r, d_in, total * train_per_class, "base train samples")?;
    let base_test_x = get_samples(&mut r, d_in, total * test_per_class, "base test samples")?;
    let mut task_x = Vec::with_capacity(tasks);
    for _ in 0..tasks {
        let train = get_samples(
            &mut r,
            d_in,
            classes_per_task * train_per_class,
            "task train samples",
        )?;
        let test = get_samples(
            &mut r,
            d_in,
            classes_per_task * test_per_class,
            "task test samples",
        )?;
        task_x.push((train, test));
    }

    let base_train_l = get_labels(&mut r, total * train_per_class, total, "base train labels")?;
    let base_test_l = get_labels(&mut r, total * test_per_class, total, "base test labels")?;
    let mut task_l = Vec::with_capacity(tasks);
    for _ in 0..tasks {
        let train = get_labels(
            &mut r,
            classes_per_task * train_per_class,
            total,
            "task train labels",
        )?;
        let test = get_labels(
            &mut r,
            classes_per_task * test_per_class,
            total,
            "task test labels",
        )?;
        task_l.push((train, test));
    }
    if r.remaining() != 0 {
        return Err(Error::Parse {
            offset: r.offset(),
            msg: format!("{} trailing bytes", r.remaining()),
        });
    }

    let base_train = dataset_from_samples(d_in, &base_train_x, base_train_l)?;
    let base_test = dataset_from_samples(d_in, &base_test_x, base_test_l)?;
    let mut specs = Vec::with_capacity(tasks);
    for (t, (rotation, ((train_x, test_x), (train_l, test_l)))) in rotations
        .into_iter()
        .zip(task_x.into_iter().zip(task_l))
        .enumerate()
    {
        let range = t * classes_per_task..(t + 1) * classes_per_task;
        let mut task_means = Matrix::zeros(classes_per_task, d_in)?;
        for (row, c) in range.clone().enumerate() {
            for i in 0..d_in {
                task_means.set(row, i, means.get(c, i));
            }
        }
        specs.push(TaskSpec {
            task_id: t,
            class_range: range,
            means: task_means,
            sigma,
            rotation,
            train: dataset_from_samples(d_in, &train_x, train_l)?,
            test: dataset_from_samples(d_in, &test_x, test_l)?,
        });
    }

    Ok(TaskSuite {
        params,
        means,
        tasks: specs,
        base_train,
        base_test,
    })
}

pub fn save_suite(suite: &TaskSuite, path: &Path) -> Result<()> {
    atomic_write(path, &suite_to_bytes(suite))
}

pub fn load_suite(path: &Path) -> Result<TaskSuite> {
    let bytes = std::fs::read(path)?;
    suite_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params(sigma: f64, seed: u64) -> SuiteParams {
        SuiteParams {
            d_in: 8,
            tasks: 3,
            classes_per_task: 3,
            train_per_class: 10,
            sigma,
            seed,
        }
    }

    fn class_centroids(task: &TaskSpec, ds: &Dataset) -> Vec<Vec<f64>> {
        let d = ds.x.rows();
        let c = task.class_range.len();
        let mut centroids = vec![vec![0.0; d]; c];
        let mut counts = vec![0usize; c];
        for (s, &l) in ds.labels.iter().enumerate() {
            let idx = l - task.class_range.start;
            for i in 0..d {
                centroids[idx][i] += ds.x.get(i, s);
            }
            counts[idx] += 1;
        }
        for (cv, n) in centroids.iter_mut().zip(&counts) {
            for v in cv.iter_mut() {
                *v /= *n as f64;
            }
        }
        centroids
    }

    /// Nearest-centroid classifier using train-split centroids.
    fn nearest_centroid_accuracy(task: &TaskSpec) -> f64 {
        let centroids = class_centroids(task, &task.train);
        let d = task.train.x.rows();
        let classes: Vec<usize> = task.class_range.clone().collect();
        let mut correct = 0;
        for (s, &l) in task.test.labels.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (ci, c) in centroids.iter().enumerate() {
                let mut dist = 0.0;
                for i in 0..d {
                    let diff = task.test.x.get(i, s) - c[i];
                    dist += diff * diff;
                }
                if dist < best_d {
                    best_d = dist;
                    best = ci;
                }
            }
            if classes[best] == l {
                correct += 1;
            }
        }
        correct as f64 / task.test.labels.len() as f64
    }

    /// Mean nearest-centroid margin (distance to closest wrong centroid
    /// minus distance to own centroid) over the test split.
    fn centroid_margin(task: &TaskSpec) -> f64 {
        let centroids = class_centroids(task, &task.train);
        let d = task.train.x.rows();
        let mut total = 0.0;
        for (s, &l) in task.test.labels.iter().enumerate() {
            let own = l - task.class_range.start;
            let mut own_d = 0.0;
            let mut wrong_d = f64::INFINITY;
            for (ci, c) in centroids.iter().enumerate() {
                let mut dist = 0.0;
                for i in 0..d {
                    let diff = task.test.x.get(i, s) - c[i];
                    dist += diff * diff;
                }
                if ci == own {
                    own_d = dist.sqrt();
                } else {
                    wrong_d = wrong_d.min(dist.sqrt());
                }
            }
            total += wrong_d - own_d;
        }
        total / task.test.labels.len() as f64
    }

    #[test]
    fn sigma_limit_collapses_to_rotated_means() {
        let suite = generate_suite(small_params(1e-9, 0)).unwrap();
        for task in &suite.tasks {
            // Every sample of class c sits at R_t mu_c up to the vanishing noise.
            for (s, &l) in task.train.labels.iter().enumerate() {
                let row = l - task.class_range.start;
                let mu: Vec<f64> = (0..suite.params.d_in)
                    .map(|i| task.means.get(row, i))
                    .collect();
                let rotated = task
                    .rotation
                    .matmul(&Matrix::from_vec(suite.params.d_in, 1, mu).unwrap())
                    .unwrap();
                for i in 0..suite.params.d_in {
                    assert!((task.train.x.get(i, s) - rotated.get(i, 0)).abs() < 1e-6);
                }
            }
            assert_eq!(nearest_centroid_accuracy(task), 1.0);
        }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let a = suite_to_bytes(&generate_suite(small_params(0.3, 5)).unwrap());
        let b = suite_to_bytes(&generate_suite(small_params(0.3, 5)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn roundtrip_save_load_save() {
        let suite = generate_suite(small_params(0.3, 5)).unwrap();
        let bytes = suite_to_bytes(&suite);
        let back = suite_from_bytes(&bytes).unwrap();
        assert_eq!(back, suite);
        assert_eq!(suite_to_bytes(&back), bytes);
    }

    #[test]
    fn truncated_suite_is_parse_error() {
        let bytes = suite_to_bytes(&generate_suite(small_params(0.3, 5)).unwrap());
        let payload = &bytes[..bytes.len() - 4];
        let cut = &payload[..payload.len() / 3];
        let mut with_crc = cut.to_vec();
        with_crc.extend_from_slice(&crc32fast::hash(cut).to_le_bytes());
        let err = suite_from_bytes(&with_crc).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn corrupted_suite_is_integrity_error() {
        let mut bytes = suite_to_bytes(&generate_suite(small_params(0.3, 5)).unwrap());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x55;
        assert!(matches!(
            suite_from_bytes(&bytes).unwrap_err(),
            Error::Integrity(_)
        ));
    }

    #[test]
    fn class_ranges_are_disjoint() {
        let suite = generate_suite(small_params(0.3, 9)).unwrap();
        let mut seen = std::collections::HashSet::new();
        for t in &suite.tasks {
            for c in t.class_range.clone() {
                assert!(seen.insert(c), "class {c} appears in two tasks");
            }
        }
    }

    #[test]
    fn rotations_are_orthogonal() {
        let suite = generate_suite(small_params(0.3, 9)).unwrap();
        for t in &suite.tasks {
            let q = &t.rotation;
            let gap = q
                .transpose()
                .matmul(q)
                .unwrap()
                .sub(&Matrix::identity(q.rows()).unwrap())
                .unwrap()
                .max_abs();
            assert!(gap < 1e-10, "task {} rotation gap {gap}", t.task_id);
        }
    }

    #[test]
    fn invalid_params_are_config_errors() {
        assert!(generate_suite(SuiteParams {
            sigma: 0.0,
            ..small_params(0.3, 0)
        })
        .is_err());
        assert!(generate_suite(SuiteParams {
            tasks: 0,
            ..small_params(0.3, 0)
        })
        .is_err());
        assert!(generate_suite(SuiteParams {
            classes_per_task: 1,
            ..small_params(0.3, 0)
        })
        .is_err());
    }

    /// Multinomial logistic probe trained with full-batch gradient descent
    /// directly on the inputs; independent of the crate's training stack.
    fn linear_probe_accuracy(task: &TaskSpec) -> f64 {
        let d = task.train.x.rows();
        let c = task.class_range.len();
        let n = task.train.len();
        let mut w = vec![vec![0.0; d]; c];
        let mut b = vec![0.0; c];
        for _step in 0..300 {
            let mut gw = vec![vec![0.0; d]; c];
            let mut gb = vec![0.0; c];
            for (s, &label) in task.train.labels.iter().enumerate() {
                let y = label - task.class_range.start;
                let logits: Vec<f64> = (0..c)
                    .map(|ci| {
                        b[ci]
                            + (0..d).map(|i| w[ci][i] * task.train.x.get(i, s)).sum::<f64>()
                    })
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
                let denom: f64 = exps.iter().sum();
                for ci in 0..c {
                    let p = exps[ci] / denom;
                    let delta = p - if ci == y { 1.0 } else { 0.0 };
                    gb[ci] += delta;
                    for i in 0..d {
                        gw[ci][i] += delta * task.train.x.get(i, s);
                    }
                }
            }
            let lr = 0.5 / n as f64;
            for ci in 0..c {
                b[ci] -= lr * gb[ci];
                for i in 0..d {
                    w[ci][i] -= lr * gw[ci][i];
                }
            }
        }
        let mut correct = 0;
        for (s, &label) in task.test.labels.iter().enumerate() {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for ci in 0..c {
                let v = b[ci]
                    + (0..d).map(|i| w[ci][i] * task.test.x.get(i, s)).sum::<f64>();
                if v > best_v {
                    best_v = v;
                    best = ci;
                }
            }
            if best == label - task.class_range.start {
                correct += 1;
            }
        }
        correct as f64 / task.test.labels.len() as f64
    }

    #[test]
    fn linear_probe_separates_every_task() {
        let suite = generate_suite(SuiteParams {
            d_in: 32,
            tasks: 3,
            classes_per_task: 4,
            train_per_class: 40,
            sigma: 0.1,
            seed: 12,
        })
        .unwrap();
        for task in &suite.tasks {
            let acc = linear_probe_accuracy(task);
            assert!(acc >= 0.95, "task {} probe accuracy {acc}", task.task_id);
        }
    }

    #[test]
    fn sigma_controls_margin() {
        let mut margins = Vec::new();
        for sigma in [0.1, 0.5, 1.0] {
            let suite = generate_suite(small_params(sigma, 4)).unwrap();
            let m: f64 =
                suite.tasks.iter().map(centroid_margin).sum::<f64>() / suite.tasks.len() as f64;
            margins.push(m);
        }
        assert!(
            margins[0] > margins[1] && margins[1] > margins[2],
            "margins {margins:?} not strictly decreasing"
        );
    }
}
