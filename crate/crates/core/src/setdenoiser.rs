//! A small multistream denoiser with shared per-stream weights and
//! ray-conditioned cross-attention across streams.
//!
//! Each stream holds one view's value on a coarse token grid. Queries come
//! from the stream's own canonical rays, keys from every stream's rays
//! expressed in that stream's camera frame, and values from stream features,
//! so the output only depends on relative camera poses and is equivariant
//! to reordering the streams.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::diffusion::{DiffusionError, SetDenoiser, ViewState};
use crate::geometry::{build_ray_map, canonicalize_set, fourier_encode, Camera, GeometryError, RayEncoding, RayMap};

#[derive(Debug, Error)]
pub enum DenoiserError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("parameter file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyMode {
    /// Keys are projections of the encoded rays alone.
    RaysOnly,
    /// Keys additionally include a projection of the stream features.
    RaysAndFeatures,
}

impl KeyMode {
    fn name(self) -> &'static str {
        match self {
            KeyMode::RaysOnly => "rays",
            KeyMode::RaysAndFeatures => "rays+features",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyDenoiserConfig {
    pub feature_dim: usize,
    pub num_blocks: usize,
    /// Diffusion steps `T`; the time table has `T + 1` rows.
    pub steps: usize,
    pub value_dim: usize,
    /// Ray-encoding frequencies `K` (`12 K` channels per token).
    pub num_frequencies: usize,
    pub token_width: u32,
    pub token_height: u32,
    pub key_mode: KeyMode,
    pub seed: u64,
}

impl Default for ToyDenoiserConfig {
    fn default() -> Self {
        Self {
            feature_dim: 16,
            num_blocks: 2,
            steps: 1000,
            value_dim: 4,
            num_frequencies: 4,
            token_width: 2,
            token_height: 2,
            key_mode: KeyMode::RaysOnly,
            seed: 0,
        }
    }
}

impl ToyDenoiserConfig {
    pub fn encoding_channels(&self) -> usize {
        12 * self.num_frequencies
    }

    /// `F D + F + (T+1) F + L (3 F^2 + F + 2 F E) + D F + D` with `E = 12 K`.
    pub fn parameter_count(&self) -> usize {
        let (f, d, e) = (self.feature_dim, self.value_dim, self.encoding_channels());
        f * d + f + (self.steps + 1) * f + self.num_blocks * (3 * f * f + f + 2 * f * e) + d * f + d
    }

    fn check(&self) -> Result<(), DenoiserError> {
        let dims = [
            ("feature_dim", self.feature_dim),
            ("num_blocks", self.num_blocks),
            ("steps", self.steps),
            ("value_dim", self.value_dim),
            ("num_frequencies", self.num_frequencies),
            ("token_width", self.token_width as usize),
            ("token_height", self.token_height as usize),
        ];
        match dims.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(DenoiserError::InvalidConfig(format!("{name} must be at least 1"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub w_mix: DMatrix<f64>,
    pub b_mix: DVector<f64>,
    pub w_q: DMatrix<f64>,
    pub w_k: DMatrix<f64>,
    pub w_v: DMatrix<f64>,
    /// Feature-to-key projection, used with [`KeyMode::RaysAndFeatures`].
    pub w_kf: DMatrix<f64>,
}

/// Weights shared by every stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDenoiserParams {
    pub config: ToyDenoiserConfig,
    pub w_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    /// Row `t` is the sinusoidal embedding of time `t`.
    pub time_table: DMatrix<f64>,
    pub blocks: Vec<Block>,
    pub w_out: DMatrix<f64>,
    pub b_out: DVector<f64>,
}

fn time_table(steps: usize, f: usize) -> DMatrix<f64> {
    DMatrix::from_fn(steps + 1, f, |t, j| {
        let freq = 10000f64.powf(-((j / 2 * 2) as f64) / f as f64);
        let x = t as f64 * freq;
        if j % 2 == 0 {
            x.sin()
        } else {
            x.cos()
        }
    })
}

/// Seeded initialization: every weight matrix is drawn i.i.d. from
/// `N(0, 1/fan_in)` with a ChaCha8 stream, in the dump order; biases start
/// at zero and the time table is the fixed sinusoidal embedding.
pub fn init_toy_denoiser(config: ToyDenoiserConfig) -> Result<ToyDenoiserParams, DenoiserError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut gauss = |rows: usize, cols: usize| {
        let sd = 1.0 / (cols as f64).sqrt();
        // Row-major fill so the draw order matches the dump order.
        DMatrix::from_row_iterator(rows, cols, (0..rows * cols).map(|_| sd * rng.sample::<f64, _>(StandardNormal)))
    };
    let (f, d, e) = (config.feature_dim, config.value_dim, config.encoding_channels());
    let w_in = gauss(f, d);
    let blocks = (0..config.num_blocks)
        .map(|_| Block {
            w_mix: gauss(f, f),
            b_mix: DVector::zeros(f),
            w_q: gauss(f, e),
            w_k: gauss(f, e),
            w_v: gauss(f, f),
            w_kf: gauss(f, f),
        })
        .collect();
    let w_out = gauss(d, f);
    Ok(ToyDenoiserParams {
        config,
        w_in,
        b_in: DVector::zeros(f),
        time_table: time_table(config.steps, f),
        blocks,
        w_out,
        b_out: DVector::zeros(d),
    })
}

impl ToyDenoiserParams {
    /// All-zero parameters; the forward pass then returns zeros.
    pub fn zeros(config: ToyDenoiserConfig) -> Result<Self, DenoiserError> {
        let mut p = init_toy_denoiser(config)?;
        p.for_each_mut(|_, m| m.fill(0.0));
        Ok(p)
    }

    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, m| n += m.len());
        n
    }

    fn for_each(&self, mut f: impl FnMut(String, &DMatrix<f64>)) {
        f("w_in".into(), &self.w_in);
        f("b_in".into(), &DMatrix::from_column_slice(self.b_in.len(), 1, self.b_in.as_slice()));
        f("time_table".into(), &self.time_table);
        for (i, b) in self.blocks.iter().enumerate() {
            f(format!("block{i}.w_mix"), &b.w_mix);
            f(format!("block{i}.b_mix"), &DMatrix::from_column_slice(b.b_mix.len(), 1, b.b_mix.as_slice()));
            f(format!("block{i}.w_q"), &b.w_q);
            f(format!("block{i}.w_k"), &b.w_k);
            f(format!("block{i}.w_v"), &b.w_v);
            f(format!("block{i}.w_kf"), &b.w_kf);
        }
        f("w_out".into(), &self.w_out);
        f("b_out".into(), &DMatrix::from_column_slice(self.b_out.len(), 1, self.b_out.as_slice()));
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(String, &mut [f64])) {
        f("w_in".into(), self.w_in.as_mut_slice());
        f("b_in".into(), self.b_in.as_mut_slice());
        f("time_table".into(), self.time_table.as_mut_slice());
        for (i, b) in self.blocks.iter_mut().enumerate() {
            f(format!("block{i}.w_mix"), b.w_mix.as_mut_slice());
            f(format!("block{i}.b_mix"), b.b_mix.as_mut_slice());
            f(format!("block{i}.w_q"), b.w_q.as_mut_slice());
            f(format!("block{i}.w_k"), b.w_k.as_mut_slice());
            f(format!("block{i}.w_v"), b.w_v.as_mut_slice());
            f(format!("block{i}.w_kf"), b.w_kf.as_mut_slice());
        }
        f("w_out".into(), self.w_out.as_mut_slice());
        f("b_out".into(), self.b_out.as_mut_slice());
    }

    /// Textual dump. First line `toy-denoiser`, then one `key value` line
    /// per configuration field, then for every tensor in order (`w_in`,
    /// `b_in`, `time_table`, per block `w_mix b_mix w_q w_k w_v w_kf`,
    /// `w_out`, `b_out`) a `name rows cols` line followed by `rows` lines of
    /// space-separated values.
    pub fn dump(&self) -> String {
        let c = &self.config;
        let mut s = String::from("toy-denoiser\n");
        for (k, v) in [
            ("feature_dim", c.feature_dim.to_string()),
            ("num_blocks", c.num_blocks.to_string()),
            ("steps", c.steps.to_string()),
            ("value_dim", c.value_dim.to_string()),
            ("num_frequencies", c.num_frequencies.to_string()),
            ("token_width", c.token_width.to_string()),
            ("token_height", c.token_height.to_string()),
            ("key_mode", c.key_mode.name().to_string()),
            ("seed", c.seed.to_string()),
        ] {
            let _ = writeln!(s, "{k} {v}");
        }
        self.for_each(|name, m| {
            let _ = writeln!(s, "{name} {} {}", m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        });
        s
    }

    pub fn load_dump(text: &str) -> Result<Self, DenoiserError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| DenoiserError::Format { line, message };
        match lines.next() {
            Some((_, "toy-denoiser")) => {}
            _ => return Err(err(1, "missing `toy-denoiser` header".into())),
        }
        let keys = [
            "feature_dim",
            "num_blocks",
            "steps",
            "value_dim",
            "num_frequencies",
            "token_width",
            "token_height",
            "key_mode",
            "seed",
        ];
        let mut fields = Vec::with_capacity(keys.len());
        for key in keys {
            let (n, l) = lines.next().ok_or_else(|| err(0, format!("missing `{key}`")))?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => fields.push((n, v)),
                _ => return Err(err(n, format!("expected `{key}`"))),
            }
        }
        let num = |i: usize| -> Result<u64, DenoiserError> {
            let (n, v) = fields[i];
            v.parse().map_err(|_| err(n, format!("`{}` must be a non-negative integer", keys[i])))
        };
        let (n, mode) = fields[7];
        let config = ToyDenoiserConfig {
            feature_dim: num(0)? as usize,
            num_blocks: num(1)? as usize,
            steps: num(2)? as usize,
            value_dim: num(3)? as usize,
            num_frequencies: num(4)? as usize,
            token_width: num(5)? as u32,
            token_height: num(6)? as u32,
            key_mode: match mode {
                "rays" => KeyMode::RaysOnly,
                "rays+features" => KeyMode::RaysAndFeatures,
                _ => return Err(err(n, format!("unknown key mode `{mode}`"))),
            },
            seed: num(8)?,
        };
        let mut params = Self::zeros(config)?;
        let mut failure = None;
        params.for_each_mut(|name, slot| {
            if failure.is_some() {
                return;
            }
            let mut read = || -> Result<(), DenoiserError> {
                let (n, header) = lines.next().ok_or_else(|| err(0, format!("missing tensor `{name}`")))?;
                let parts: Vec<&str> = header.split_whitespace().collect();
                let (rows, cols) = match parts[..] {
                    [nm, r, c] if nm == name => (
                        r.parse::<usize>().map_err(|_| err(n, "bad row count".into()))?,
                        c.parse::<usize>().map_err(|_| err(n, "bad column count".into()))?,
                    ),
                    _ => return Err(err(n, format!("expected tensor `{name}`"))),
                };
                if rows * cols != slot.len() {
                    return Err(err(n, format!("`{name}` has {rows}x{cols} values, expected {}", slot.len())));
                }
                for r in 0..rows {
                    let (n, l) = lines.next().ok_or_else(|| err(0, format!("`{name}` is truncated")))?;
                    let vals: Vec<f64> = l
                        .split_whitespace()
                        .map(|v| v.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err(n, "bad number".into()))?;
                    if vals.len() != cols {
                        return Err(err(n, format!("expected {cols} values")));
                    }
                    // Column-major storage.
                    for (c, v) in vals.into_iter().enumerate() {
                        slot[c * rows + r] = v;
                    }
                }
                Ok(())
            };
            if let Err(e) = read() {
                failure = Some(e);
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(params),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DenoiserError> {
        Ok(std::fs::write(path, self.dump())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DenoiserError> {
        Self::load_dump(&std::fs::read_to_string(path)?)
    }
}

/// Encoded tokens (`tokens x E`) of every stream in frame `i`, for every `i`.
fn encoded_frames(ray_maps: &[RayMap], encoding: &RayEncoding) -> Result<Vec<Vec<DMatrix<f64>>>, DenoiserError> {
    (0..ray_maps.len())
        .map(|i| {
            canonicalize_set(ray_maps, i)?
                .iter()
                .map(|m| {
                    let enc = fourier_encode(m, encoding)?;
                    Ok(DMatrix::from_row_slice(m.rays().len(), enc.channels(), &enc.values))
                })
                .collect()
        })
        .collect()
}

fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// Unmasked per-stream estimates (one per view, in input order).
pub fn forward_all(
    params: &ToyDenoiserParams,
    views: &[ViewState],
    ray_maps: &[RayMap],
) -> Result<Vec<Vec<f64>>, DenoiserError> {
    let c = &params.config;
    let (f, s) = (c.feature_dim, views.len());
    if ray_maps.len() != s {
        return Err(DenoiserError::Shape(format!("{} ray maps for {s} views", ray_maps.len())));
    }
    if s == 0 {
        return Ok(Vec::new());
    }
    let p = ray_maps[0].rays().len();
    if ray_maps.iter().any(|m| m.rays().len() != p) || p == 0 {
        return Err(DenoiserError::Shape("ray maps must share a non-empty token grid".into()));
    }
    for v in views {
        if v.value.len() != c.value_dim {
            return Err(DenoiserError::Shape(format!("view `{}` has dimension {}", v.id, v.value.len())));
        }
        if v.time > c.steps {
            return Err(DenoiserError::Shape(format!("view `{}` has time {} > {}", v.id, v.time, c.steps)));
        }
    }
    let encoding = RayEncoding::with_frequencies(c.num_frequencies);
    let frames = encoded_frames(ray_maps, &encoding)?;

    // Features: row (stream * p + token).
    let mut feat = DMatrix::zeros(s * p, f);
    for (i, v) in views.iter().enumerate() {
        let h = &params.w_in * DVector::from_column_slice(&v.value) + &params.b_in
            + params.time_table.row(v.time).transpose();
        for t in 0..p {
            feat.row_mut(i * p + t).copy_from(&h.transpose());
        }
    }
    let scale = 1.0 / (f as f64).sqrt();
    for block in &params.blocks {
        let mut mixed = &feat * block.w_mix.transpose();
        for mut row in mixed.row_iter_mut() {
            row += block.b_mix.transpose();
            row.apply(|x| *x = x.tanh());
        }
        feat += mixed;
        let values = &feat * block.w_v.transpose();
        let key_features = match c.key_mode {
            KeyMode::RaysOnly => None,
            KeyMode::RaysAndFeatures => Some(&feat * block.w_kf.transpose()),
        };
        let mut update = DMatrix::zeros(s * p, f);
        for i in 0..s {
            let queries = &frames[i][i] * block.w_q.transpose();
            let mut keys = DMatrix::zeros(s * p, f);
            for j in 0..s {
                keys.rows_mut(j * p, p).copy_from(&(&frames[i][j] * block.w_k.transpose()));
            }
            if let Some(kf) = &key_features {
                keys += kf;
            }
            let mut weights = (queries * keys.transpose()) * scale;
            for mut row in weights.row_iter_mut() {
                let mut r: Vec<f64> = row.iter().copied().collect();
                softmax_in_place(&mut r);
                row.copy_from_slice(&r);
            }
            update.rows_mut(i * p, p).copy_from(&(weights * &values));
        }
        feat += update;
    }
    Ok((0..s)
        .map(|i| {
            let pooled = feat.rows(i * p, p).row_mean().transpose();
            (&params.w_out * pooled + &params.b_out).as_slice().to_vec()
        })
        .collect())
}

/// Noise estimates for the views with time > 0, in input order.
pub fn forward(
    params: &ToyDenoiserParams,
    views: &[ViewState],
    ray_maps: &[RayMap],
) -> Result<Vec<Vec<f64>>, DenoiserError> {
    let all = forward_all(params, views, ray_maps)?;
    Ok(all.into_iter().zip(views).filter(|(_, v)| v.time > 0).map(|(e, _)| e).collect())
}

/// Ray maps on the configured token grid.
pub fn token_ray_maps(
    config: &ToyDenoiserConfig,
    views: &[ViewState],
    cameras: &[Camera],
) -> Result<Vec<RayMap>, DenoiserError> {
    if cameras.len() != views.len() {
        return Err(DenoiserError::Shape(format!("{} cameras for {} views", cameras.len(), views.len())));
    }
    views
        .iter()
        .zip(cameras)
        .map(|(v, cam)| Ok(build_ray_map(v.id.clone(), &cam.resized(config.token_width, config.token_height)?)))
        .collect()
}

impl SetDenoiser for ToyDenoiserParams {
    fn estimate(&self, views: &[ViewState], cameras: &[Camera]) -> Result<Vec<Vec<f64>>, DiffusionError> {
        let run = || forward(self, views, &token_ray_maps(&self.config, views, cameras)?);
        run().map_err(|e| DiffusionError::InvalidParameter(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Intrinsics, Mat3, Vec3};

    fn small() -> ToyDenoiserConfig {
        ToyDenoiserConfig { feature_dim: 8, num_blocks: 2, steps: 50, value_dim: 3, num_frequencies: 2, seed: 11, ..Default::default() }
    }

    fn cam(x: f64, z: f64) -> Camera {
        let k = Intrinsics { fx: 20.0, fy: 20.0, cx: 8.0, cy: 6.0, width: 16, height: 12 };
        Camera::looking(k, Mat3::identity(), Vec3::new(x, 0.2 * x, z)).unwrap()
    }

    #[test]
    fn parameter_count_matches_shapes() {
        let c = ToyDenoiserConfig { feature_dim: 8, num_blocks: 2, steps: 1000, value_dim: 4, num_frequencies: 4, ..Default::default() };
        let p = init_toy_denoiser(c).unwrap();
        // 8*4 + 8 + 1001*8 + 2*(3*64 + 8 + 2*8*48) + 4*8 + 4
        assert_eq!(c.parameter_count(), 10020);
        assert_eq!(p.parameter_count(), 10020);
    }

    #[test]
    fn seeded_init_is_deterministic() {
        assert_eq!(init_toy_denoiser(small()).unwrap(), init_toy_denoiser(small()).unwrap());
        let other = init_toy_denoiser(ToyDenoiserConfig { seed: 12, ..small() }).unwrap();
        assert_ne!(init_toy_denoiser(small()).unwrap(), other);
        assert!(init_toy_denoiser(ToyDenoiserConfig { feature_dim: 0, ..small() }).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let p = ToyDenoiserParams::zeros(small()).unwrap();
        let views = vec![ViewState::new("a", vec![1.0, 2.0, 3.0], 0), ViewState::new("b", vec![0.5, 0.0, -1.0], 7)];
        let out = p.estimate(&views, &[cam(0.0, 0.0), cam(1.0, 0.5)]).unwrap();
        assert_eq!(out, vec![vec![0.0; 3]]);
    }

    #[test]
    fn identical_streams_get_identical_estimates() {
        let p = init_toy_denoiser(small()).unwrap();
        let v = ViewState::new("a", vec![0.3, -0.2, 0.9], 10);
        let views = vec![v.clone(), ViewState { id: "b".into(), ..v }, ViewState::new("c", vec![0.0; 3], 0)];
        let out = p.estimate(&views, &[cam(1.0, 0.0), cam(1.0, 0.0), cam(0.0, 0.0)]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn dump_round_trip() {
        let p = init_toy_denoiser(ToyDenoiserConfig { key_mode: KeyMode::RaysAndFeatures, ..small() }).unwrap();
        let text = p.dump();
        assert!(text.starts_with("toy-denoiser\nfeature_dim 8\n"));
        assert_eq!(ToyDenoiserParams::load_dump(&text).unwrap(), p);
        let broken = text.replacen("w_in 8 3", "w_in 8 4", 1);
        assert!(matches!(ToyDenoiserParams::load_dump(&broken), Err(DenoiserError::Format { .. })));
    }
}
