//! Signal model: constellations, fading channels, pilots, data and noise.
//!
//! The received block is `Y = H X + V` with `X = [X_t, X_d]`: `T_t` pilot
//! columns followed by `T_d` data columns, all sharing one channel draw.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMat, Scalar};

/// Square `beta`-QAM alphabet with odd-integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    beta: u32,
    side: usize,
    points: Vec<Complex64>,
    energy_per_symbol: f64,
    box_radius: f64,
}

impl Constellation {
    pub fn new(beta: u32) -> Result<Self> {
        make_constellation(beta)
    }

    pub fn qpsk() -> Self {
        make_constellation(4).expect("4-QAM is valid")
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    /// Number of amplitude levels per real dimension (`sqrt(beta)`).
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Mean of `|s|^2` over the alphabet.
    pub fn energy_per_symbol(&self) -> f64 {
        self.energy_per_symbol
    }

    /// Half-width of the constellation's bounding box, `sqrt(beta) - 1`.
    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.beta.trailing_zeros()
    }

    /// Amplitude of level `i` in `0..side`.
    #[inline]
    pub fn level(&self, i: usize) -> f64 {
        2.0 * i as f64 - (self.side as f64 - 1.0)
    }

    /// Index of the level nearest to `x`; ties go to the lower level.
    #[inline]
    pub fn nearest_level(&self, x: f64) -> usize {
        let t = (x + self.side as f64 - 1.0) / 2.0;
        let i = (t - 0.5).ceil();
        i.clamp(0.0, self.side as f64 - 1.0) as usize
    }

    pub fn contains(&self, s: Complex64) -> bool {
        self.points.contains(&s)
    }
}

/// Builds the full `beta`-QAM alphabet.
pub fn make_constellation(beta: u32) -> Result<Constellation> {
    let side = (beta as f64).sqrt().round() as u32;
    if beta < 4 || side * side != beta {
        return Err(Error::InvalidModulation(beta));
    }
    let side = side as usize;
    let level = |i: usize| 2.0 * i as f64 - (side as f64 - 1.0);
    let mut points = Vec::with_capacity(beta as usize);
    for i in 0..side {
        for q in 0..side {
            points.push(Complex64::new(level(i), level(q)));
        }
    }
    let energy_per_symbol = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
    Ok(Constellation {
        beta,
        side,
        points,
        energy_per_symbol,
        box_radius: side as f64 - 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    IidRayleigh,
    Kronecker,
}

/// Block-fading channel description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub n_rx: usize,
    pub n_tx: usize,
    pub kind: ChannelKind,
    /// Per-entry variance of the channel coefficients.
    pub sigma_h_sq: f64,
    /// Receiver-side correlation coefficient; unused for i.i.d. channels.
    pub rho_c: f64,
}

impl ChannelSpec {
    /// I.i.d. Rayleigh channel with the default variance `1/K`.
    pub fn iid(n_rx: usize, n_tx: usize) -> Self {
        Self {
            n_rx,
            n_tx,
            kind: ChannelKind::IidRayleigh,
            sigma_h_sq: 1.0 / n_tx as f64,
            rho_c: 0.0,
        }
    }

    pub fn kronecker(n_rx: usize, n_tx: usize, rho_c: f64) -> Self {
        Self {
            kind: ChannelKind::Kronecker,
            rho_c,
            ..Self::iid(n_rx, n_tx)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rx == 0 || self.n_tx == 0 {
            return Err(Error::InvalidArgument("channel dimensions must be positive".into()));
        }
        if !(self.sigma_h_sq >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "channel variance {} must be non-negative",
                self.sigma_h_sq
            )));
        }
        if self.kind == ChannelKind::Kronecker && !(0.0..1.0).contains(&self.rho_c) {
            return Err(Error::InvalidCorrelation(self.rho_c));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_v_sq: f64,
}

/// One circularly-symmetric complex Gaussian sample of total variance `var`.
#[inline]
fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn complex_gaussian_mat<R: Rng + ?Sized>(rows: usize, cols: usize, var: f64, rng: &mut R) -> ComplexMat {
    ComplexMat::from_fn(rows, cols, |_, _| complex_gaussian(rng, var))
}

/// `N x K` matrix of independent `CN(0, sigma_h_sq)` entries.
pub fn gen_iid_rayleigh<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> Result<ComplexMat> {
    spec.validate()?;
    Ok(complex_gaussian_mat(spec.n_rx, spec.n_tx, spec.sigma_h_sq, rng))
}

/// Exponential correlation matrix with entries `rho_c^|i-j|`.
pub fn exp_correlation_matrix(n: usize, rho_c: f64) -> Result<ComplexMat> {
    if !(0.0..1.0).contains(&rho_c) {
        return Err(Error::InvalidCorrelation(rho_c));
    }
    Ok(ComplexMat::from_fn(n, n, |i, j| {
        Complex64::new(rho_c.powi(i.abs_diff(j) as i32), 0.0)
    }))
}

/// Lower-triangular `F` with `F F^H = R` for Hermitian PSD `R`.
///
/// Cholesky with zero-pivot tolerance: pivots within `1e-10 * trace(R)` of
/// zero produce a zero column, so singular PSD inputs still factor.
pub fn psd_factor(r: &ComplexMat) -> Result<ComplexMat> {
    let n = r.rows();
    if r.cols() != n {
        return Err(Error::Shape(format!("psd_factor of {}x{}", r.rows(), r.cols())));
    }
    let scale = r.trace().re.abs().max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    for i in 0..n {
        for j in 0..=i {
            if (r[(i, j)] - r[(j, i)].conj()).norm() > tol {
                return Err(Error::Factorization(format!("input is not Hermitian at ({i}, {j})")));
            }
        }
    }
    let mut f = ComplexMat::zeros(n, n);
    for j in 0..n {
        let mut d = r[(j, j)].re;
        for k in 0..j {
            d -= f[(j, k)].norm_sqr();
        }
        if d < -tol {
            return Err(Error::Factorization(format!(
                "matrix is not positive semi-definite (pivot {d:e} at column {j})"
            )));
        }
        if d <= tol {
            continue;
        }
        let djj = d.sqrt();
        f[(j, j)] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = r[(i, j)];
            for k in 0..j {
                s -= f[(i, k)] * f[(j, k)].conj();
            }
            f[(i, j)] = s / djj;
        }
    }
    let recon = f.mul_adj(&f)?;
    let err = recon.sub(r)?.frob_norm();
    if err > 1e-8 * r.frob_norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Factorization(format!(
            "matrix is not positive semi-definite (reconstruction error {err:e})"
        )));
    }
    Ok(f)
}

/// Kronecker-correlated channel `R_r^{1/2} H_w` with identity transmit correlation.
pub fn gen_kronecker<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> Result<ComplexMat> {
    spec.validate()?;
    let rr = exp_correlation_matrix(spec.n_rx, spec.rho_c)?;
    let factor = psd_factor(&rr)?;
    let hw = complex_gaussian_mat(spec.n_rx, spec.n_tx, spec.sigma_h_sq, rng);
    factor.matmul(&hw)
}

/// Draws a channel according to `spec.kind`.
pub fn gen_channel<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> Result<ComplexMat> {
    match spec.kind {
        ChannelKind::IidRayleigh => gen_iid_rayleigh(spec, rng),
        ChannelKind::Kronecker => gen_kronecker(spec, rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotScheme {
    Dft,
    OneHot,
}

/// First `K` rows of the `T_t`-point DFT matrix, scaled by `amplitude`.
pub fn gen_dft_pilots(users: usize, t_pilot: usize, amplitude: f64) -> Result<ComplexMat> {
    if t_pilot < users || users == 0 {
        return Err(Error::InsufficientPilots {
            users,
            slots: t_pilot,
        });
    }
    Ok(ComplexMat::from_fn(users, t_pilot, |k, t| {
        let phase = -2.0 * PI * ((k * t) % t_pilot) as f64 / t_pilot as f64;
        Complex64::from_polar(amplitude, phase)
    }))
}

/// One user active per slot, cycling through users.
pub fn gen_one_hot_pilots(users: usize, t_pilot: usize, amplitude: f64) -> Result<ComplexMat> {
    if t_pilot < users || users == 0 {
        return Err(Error::InsufficientPilots {
            users,
            slots: t_pilot,
        });
    }
    Ok(ComplexMat::from_fn(users, t_pilot, |k, t| {
        if t % users == k {
            Complex64::new(amplitude, 0.0)
        } else {
            Complex64::zero()
        }
    }))
}

pub fn gen_pilots(scheme: PilotScheme, users: usize, t_pilot: usize, amplitude: f64) -> Result<ComplexMat> {
    match scheme {
        PilotScheme::Dft => gen_dft_pilots(users, t_pilot, amplitude),
        PilotScheme::OneHot => gen_one_hot_pilots(users, t_pilot, amplitude),
    }
}

/// `K x T_d` block of symbols drawn uniformly from the alphabet.
pub fn gen_data<R: Rng + ?Sized>(
    users: usize,
    t_data: usize,
    constellation: &Constellation,
    rng: &mut R,
) -> Result<ComplexMat> {
    if t_data == 0 {
        return Err(Error::InvalidArgument("data block must be non-empty".into()));
    }
    let points = constellation.points();
    Ok(ComplexMat::from_fn(users, t_data, |_, _| {
        points[rng.random_range(0..points.len())]
    }))
}

/// Noise variance for a per-antenna SNR of `E_s / sigma_v^2`.
pub fn snr_to_noise_var(snr_db: f64, energy_per_symbol: f64) -> f64 {
    energy_per_symbol / 10f64.powf(snr_db / 10.0)
}

/// `Y = H X + V`.
pub fn transmit<R: Rng + ?Sized>(
    h: &ComplexMat,
    x: &ComplexMat,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<ComplexMat> {
    if !(noise.sigma_v_sq >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance {} must be non-negative",
            noise.sigma_v_sq
        )));
    }
    let mut y = h.matmul(x)?;
    if noise.sigma_v_sq > 0.0 {
        for v in y.as_mut_slice() {
            *v += complex_gaussian(rng, noise.sigma_v_sq);
        }
    }
    Ok(y)
}

/// Physical link setup shared by every trial of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkScenario {
    pub channel: ChannelSpec,
    pub t_pilot: usize,
    pub t_data: usize,
    pub pilot_scheme: PilotScheme,
    /// QAM order of the data symbols.
    pub beta: u32,
}

/// One channel use: the drawn channel, transmitted blocks and received block.
#[derive(Debug, Clone)]
pub struct Realization {
    pub h: ComplexMat,
    pub x_t: ComplexMat,
    pub x_d: ComplexMat,
    /// `[Y_t, Y_d]`
    pub y: ComplexMat,
    pub sigma_v_sq: f64,
}

impl Realization {
    pub fn y_data(&self) -> ComplexMat {
        self.y.col_range(self.x_t.cols(), self.y.cols())
    }
}

impl LinkScenario {
    /// 4-QAM over an i.i.d. channel with `T_t = K` DFT pilots.
    pub fn iid(n_rx: usize, n_tx: usize, t_data: usize) -> Self {
        Self {
            channel: ChannelSpec::iid(n_rx, n_tx),
            t_pilot: n_tx,
            t_data,
            pilot_scheme: PilotScheme::Dft,
            beta: 4,
        }
    }

    pub fn constellation(&self) -> Result<Constellation> {
        make_constellation(self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        make_constellation(self.beta)?;
        if self.t_pilot < self.channel.n_tx {
            return Err(Error::InsufficientPilots {
                users: self.channel.n_tx,
                slots: self.t_pilot,
            });
        }
        if self.t_data == 0 {
            return Err(Error::InvalidArgument("t_data must be positive".into()));
        }
        Ok(())
    }

    /// `sigma_v^2 / sigma_h^2` at the given SNR.
    pub fn noise_ratio(&self, snr_db: f64) -> Result<f64> {
        let es = self.constellation()?.energy_per_symbol();
        Ok(snr_to_noise_var(snr_db, es) / self.channel.sigma_h_sq)
    }

    /// Draws channel, data and noise, in that order, from `rng`.
    ///
    /// The draw order does not depend on the SNR, so one seed gives the same
    /// channel, symbols and noise shape at every SNR point.
    pub fn realize<R: Rng + ?Sized>(&self, snr_db: f64, rng: &mut R) -> Result<Realization> {
        let cons = self.constellation()?;
        let es = cons.energy_per_symbol();
        let sigma_v_sq = snr_to_noise_var(snr_db, es);
        self.realize_with_noise(sigma_v_sq, rng)
    }

    pub fn realize_with_noise<R: Rng + ?Sized>(&self, sigma_v_sq: f64, rng: &mut R) -> Result<Realization> {
        self.validate()?;
        let cons = self.constellation()?;
        let k = self.channel.n_tx;
        let h = gen_channel(&self.channel, rng)?;
        let x_t = gen_pilots(self.pilot_scheme, k, self.t_pilot, cons.energy_per_symbol().sqrt())?;
        let x_d = gen_data(k, self.t_data, &cons, rng)?;
        let y = transmit(&h, &x_t.hcat(&x_d)?, NoiseSpec { sigma_v_sq }, rng)?;
        Ok(Realization {
            h,
            x_t,
            x_d,
            y,
            sigma_v_sq,
        })
    }
}
