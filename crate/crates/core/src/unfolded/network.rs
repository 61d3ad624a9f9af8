//! Forward pass and reverse-mode gradient of the unfolded network.
//!
//! Each layer `l` computes
//!
//! ```text
//! X   = (H^T H + rho_l I)^{-1} (H^T Y_d + rho_l (Z - Lambda))
//! Z'  = tanh((X + Lambda) / |theta_l|)
//! L'  = Lambda + alpha_l (X - Z')
//! H'  = S(Y_t X_t^T + Y_d X^T) (S(X_t X_t^T + X X^T) + gamma_l I)^{-1}
//! ```
//!
//! where `S` maps a `2a x 2b` real matrix onto the block form of a complex
//! matrix, `S(A B^T) = C(A) C(B)^T` for stacked signals `A`, `B` and their
//! channel-form images `C(.)`. With stacked signals this keeps `H` in block
//! form, which is what makes the real network equal to the complex one.

use crate::detectors::hard_decision;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, ComplexMat, RealMat};
use crate::model::Constellation;

use super::{derealify_channel, derealify_signal, realify, RealKind, UnfoldedParams, THETA_FLOOR};

/// Auxiliary-variable update of Step 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZUpdate {
    /// `tanh((X + Lambda) / |theta|)`.
    Tanh,
    /// Box projection of `X + Lambda`; `theta` is ignored.
    Project { radius: f64 },
}

/// Per-layer diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerRecord {
    pub layer: usize,
    /// `|theta_l|` was below [`THETA_FLOOR`] and was clamped.
    pub theta_clamped: bool,
    /// `||X - Z||_F` after the layer's Z-update.
    pub primal_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Relaxed data estimate `X_d^(L)`, `2K x T_d`.
    pub x: RealMat,
    /// Channel estimate `H^(L)` in block form, `2N x 2K`.
    pub h: RealMat,
    pub trace: Vec<LayerRecord>,
}

/// `[[P11 + P22, P12 - P21], [P21 - P12, P11 + P22]]`. Self-adjoint under
/// the Frobenius inner product.
pub(crate) fn complex_structure(p: &RealMat) -> RealMat {
    let (a, b) = (p.rows() / 2, p.cols() / 2);
    RealMat::from_fn(2 * a, 2 * b, |i, j| {
        let (ii, jj) = (i % a, j % b);
        let p11 = p[(ii, jj)];
        let p12 = p[(ii, jj + b)];
        let p21 = p[(ii + a, jj)];
        let p22 = p[(ii + a, jj + b)];
        match (i < a, j < b) {
            (true, true) | (false, false) => p11 + p22,
            (true, false) => p12 - p21,
            (false, true) => p21 - p12,
        }
    })
}

struct LayerTape {
    h_prev: RealMat,
    x: RealMat,
    z_prev: RealMat,
    lambda_prev: RealMat,
    z_new: RealMat,
    h_new: RealMat,
    g_chol: Cholesky<f64>,
    m_chol: Cholesky<f64>,
    theta_abs: f64,
    theta_clamped: bool,
}

struct Tape {
    y_d: RealMat,
    h0: RealMat,
    m0_chol: Cholesky<f64>,
    layers: Vec<LayerTape>,
}

fn check_inputs(y: &RealMat, x_t: &RealMat, params: &UnfoldedParams) -> Result<()> {
    params.validate()?;
    if !y.rows().is_multiple_of(2) || !x_t.rows().is_multiple_of(2) {
        return Err(Error::Shape("stacked signals need an even number of rows".into()));
    }
    if y.cols() <= x_t.cols() {
        return Err(Error::Shape(format!(
            "received block has {} columns, need more than {} pilot columns",
            y.cols(),
            x_t.cols()
        )));
    }
    Ok(())
}

fn run(
    y: &RealMat,
    x_t: &RealMat,
    params: &UnfoldedParams,
    z_update: ZUpdate,
    keep_tape: bool,
) -> Result<(ForwardOutput, Option<Tape>)> {
    check_inputs(y, x_t, params)?;
    let t_t = x_t.cols();
    let y_t = y.col_range(0, t_t);
    let y_d = y.col_range(t_t, y.cols());
    let k2 = x_t.rows();

    let cross = y_t.mul_adj(x_t)?;
    let pilot_gram = x_t.gram_rows();

    let mut m0 = complex_structure(&pilot_gram);
    m0.add_diag(params.gamma0);
    let m0_chol = Cholesky::new(&m0).map_err(|e| e.at_iteration(0))?;
    let mut h = m0_chol.solve_right(&complex_structure(&cross))?;
    let h0 = h.clone();

    let mut z = RealMat::zeros(k2, y_d.cols());
    let mut lambda = RealMat::zeros(k2, y_d.cols());
    let mut x = RealMat::zeros(k2, y_d.cols());
    let mut trace = Vec::with_capacity(params.layers);
    let mut layers = Vec::with_capacity(if keep_tape { params.layers } else { 0 });

    for l in 0..params.layers {
        let (rho, theta, alpha, gamma) = params.layer(l);

        // Step 1
        let mut g = h.adj_mul(&h)?;
        g.add_diag(rho);
        let mut rhs = h.adj_mul(&y_d)?;
        for ((r, &zv), &lv) in rhs.as_mut_slice().iter_mut().zip(z.as_slice()).zip(lambda.as_slice()) {
            *r += rho * (zv - lv);
        }
        let g_chol = Cholesky::new(&g).map_err(|e| e.at_iteration(l + 1))?;
        g_chol.solve_in_place(&mut rhs)?;
        x = rhs;

        // Step 2
        let theta_abs_raw = theta.abs();
        let theta_clamped = theta_abs_raw < THETA_FLOOR;
        let theta_abs = theta_abs_raw.max(THETA_FLOOR);
        let z_new = match z_update {
            ZUpdate::Tanh => x.zip_map(&lambda, |xv, lv| ((xv + lv) / theta_abs).tanh())?,
            ZUpdate::Project { radius } => x.zip_map(&lambda, |xv, lv| (xv + lv).clamp(-radius, radius))?,
        };

        // Step 3
        let mut lambda_new = lambda.clone();
        let mut residual = 0.0;
        for ((lv, &xv), &zv) in lambda_new.as_mut_slice().iter_mut().zip(x.as_slice()).zip(z_new.as_slice()) {
            let r = xv - zv;
            *lv += alpha * r;
            residual += r * r;
        }

        // Step 4
        let mut p = y_d.mul_adj(&x)?;
        p.axpy(1.0, &cross)?;
        let p = complex_structure(&p);
        let mut m = x.gram_rows();
        m.axpy(1.0, &pilot_gram)?;
        let mut m = complex_structure(&m);
        m.add_diag(gamma);
        let m_chol = Cholesky::new(&m).map_err(|e| e.at_iteration(l + 1))?;
        let h_new = m_chol.solve_right(&p)?;

        if !x.is_finite() || !h_new.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: l + 1,
                reason: "non-finite layer output".into(),
            });
        }

        trace.push(LayerRecord {
            layer: l + 1,
            theta_clamped: theta_clamped && z_update == ZUpdate::Tanh,
            primal_residual: residual.sqrt(),
        });

        let h_prev = std::mem::replace(&mut h, h_new);
        let z_prev = std::mem::replace(&mut z, z_new);
        let lambda_prev = std::mem::replace(&mut lambda, lambda_new);
        if keep_tape {
            layers.push(LayerTape {
                h_prev,
                x: x.clone(),
                z_prev,
                lambda_prev,
                z_new: z.clone(),
                h_new: h.clone(),
                g_chol,
                m_chol,
                theta_abs,
                theta_clamped,
            });
        }
    }

    let out = ForwardOutput { x, h, trace };
    let tape = keep_tape.then_some(Tape {
        y_d,
        h0,
        m0_chol,
        layers,
    });
    Ok((out, tape))
}

/// Forward pass with the `tanh` auxiliary update.
pub fn u_admm_forward(y: &RealMat, x_t: &RealMat, params: &UnfoldedParams) -> Result<ForwardOutput> {
    u_admm_forward_with(y, x_t, params, ZUpdate::Tanh)
}

pub fn u_admm_forward_with(
    y: &RealMat,
    x_t: &RealMat,
    params: &UnfoldedParams,
    z_update: ZUpdate,
) -> Result<ForwardOutput> {
    Ok(run(y, x_t, params, z_update, false)?.0)
}

/// `||x_true - x_est||_F^2`.
pub fn loss(x_true: &RealMat, x_est: &RealMat) -> Result<f64> {
    Ok(x_true.sub(x_est)?.frob_norm_sq())
}

/// Loss and its gradient with respect to [`UnfoldedParams::to_trainable`].
pub fn grad_params(
    y: &RealMat,
    x_t: &RealMat,
    x_d_true: &RealMat,
    params: &UnfoldedParams,
) -> Result<(f64, Vec<f64>)> {
    grad_params_with_upstream(y, x_t, x_d_true, params, 1.0)
}

/// Same as [`grad_params`] for the loss `weight * ||x_true - x_est||_F^2`.
pub fn grad_params_with_upstream(
    y: &RealMat,
    x_t: &RealMat,
    x_d_true: &RealMat,
    params: &UnfoldedParams,
    weight: f64,
) -> Result<(f64, Vec<f64>)> {
    let (out, tape) = run(y, x_t, params, ZUpdate::Tanh, true)?;
    let tape = tape.expect("tape requested");
    let diff = out.x.sub(x_d_true)?;
    let value = weight * diff.frob_norm_sq();
    let upstream = diff.scaled(2.0 * weight);
    let grad = backward(&tape, params, upstream)?;
    Ok((value, grad))
}

fn backward(tape: &Tape, params: &UnfoldedParams, dl_dx: RealMat) -> Result<Vec<f64>> {
    let n_layers = params.layers;
    let per = params.theta.len();
    let mut g_rho = vec![0.0; n_layers];
    let mut g_theta = vec![0.0; per];
    let mut g_alpha = vec![0.0; per];
    let mut g_gamma = vec![0.0; per];

    let (k2, t_d) = dl_dx.shape();
    let n2 = tape.y_d.rows();
    let mut h_bar = RealMat::zeros(n2, k2);
    let mut z_bar = RealMat::zeros(k2, t_d);
    let mut lambda_bar = RealMat::zeros(k2, t_d);
    let mut x_out_bar = Some(dl_dx);
    let mut h_bar_live = false;

    for l in (0..n_layers).rev() {
        let t = &tape.layers[l];
        let (rho, theta, alpha, _) = params.layer(l);
        let pi = if per == 1 { 0 } else { l };
        let mut x_bar = x_out_bar.take().unwrap_or_else(|| RealMat::zeros(k2, t_d));

        // Step 4: H' = P M^{-1}
        if h_bar_live {
            let p_bar = t.m_chol.solve_right(&h_bar)?;
            let m_bar = t.h_new.adj_mul(&p_bar)?.scaled(-1.0);
            g_gamma[pi] += m_bar.trace();
            let w = complex_structure(&m_bar);
            let w_sym = w.add(&w.adjoint())?;
            x_bar.axpy(1.0, &w_sym.matmul(&t.x)?)?;
            let v = complex_structure(&p_bar);
            x_bar.axpy(1.0, &v.adj_mul(&tape.y_d)?)?;
        }

        // Step 3: Lambda' = Lambda + alpha (X - Z')
        let mut alpha_acc = 0.0;
        for ((&lb, &xv), &zv) in lambda_bar.as_slice().iter().zip(t.x.as_slice()).zip(t.z_new.as_slice()) {
            alpha_acc += lb * (xv - zv);
        }
        g_alpha[pi] += alpha_acc;
        x_bar.axpy(alpha, &lambda_bar)?;
        z_bar.axpy(-alpha, &lambda_bar)?;

        // Step 2: Z' = tanh((X + Lambda) / |theta|)
        let inv = 1.0 / t.theta_abs;
        let mut theta_acc = 0.0;
        {
            let xb = x_bar.as_mut_slice();
            let lb = lambda_bar.as_mut_slice();
            for i in 0..xb.len() {
                let zn = t.z_new.as_slice()[i];
                let u_bar = z_bar.as_slice()[i] * (1.0 - zn * zn);
                let s = t.x.as_slice()[i] + t.lambda_prev.as_slice()[i];
                xb[i] += u_bar * inv;
                lb[i] += u_bar * inv;
                theta_acc += u_bar * s;
            }
        }
        if !t.theta_clamped {
            g_theta[pi] += -theta_acc * inv * inv * theta.signum();
        }

        // Step 1: X = G^{-1} B
        let b_bar = t.g_chol.solve(&x_bar)?;
        let g_bar = b_bar.mul_adj(&t.x)?.scaled(-1.0);
        let g_sym = g_bar.add(&g_bar.adjoint())?;
        let mut rho_acc = g_bar.trace();
        for ((&bb, &zv), &lv) in b_bar
            .as_slice()
            .iter()
            .zip(t.z_prev.as_slice())
            .zip(t.lambda_prev.as_slice())
        {
            rho_acc += bb * (zv - lv);
        }
        g_rho[l] += rho_acc;

        h_bar = t.h_prev.matmul(&g_sym)?;
        h_bar.axpy(1.0, &tape.y_d.mul_adj(&b_bar)?)?;
        h_bar_live = true;
        z_bar = b_bar.scaled(rho);
        lambda_bar.axpy(-rho, &b_bar)?;
    }

    // Initialization: H0 = S(Y_t X_t^T) M0^{-1}
    let p0_bar = tape.m0_chol.solve_right(&h_bar)?;
    let g_gamma0 = -tape.h0.adj_mul(&p0_bar)?.trace();

    let mut grad = Vec::with_capacity(params.trainable_count());
    grad.extend(g_rho.iter().zip(&params.rho).map(|(g, r)| g * r));
    grad.extend(g_theta);
    grad.extend(g_alpha);
    grad.extend(g_gamma);
    if params.mode == super::ParamMode::Shared {
        grad.push(g_gamma0);
    }
    Ok(grad)
}

/// Hard-decided symbols and complex channel estimate from real inputs.
pub fn infer(
    y: &RealMat,
    x_t: &RealMat,
    params: &UnfoldedParams,
    z_update: ZUpdate,
    constellation: &Constellation,
) -> Result<(ComplexMat, ComplexMat)> {
    let out = u_admm_forward_with(y, x_t, params, z_update)?;
    let x = derealify_signal(&out.x)?;
    let h = derealify_channel(&out.h)?;
    Ok((hard_decision(&x, constellation), h))
}

/// [`infer`] on complex received and pilot blocks.
pub fn infer_complex(
    y: &ComplexMat,
    x_t: &ComplexMat,
    params: &UnfoldedParams,
    z_update: ZUpdate,
    constellation: &Constellation,
) -> Result<(ComplexMat, ComplexMat)> {
    infer(
        &realify(y, RealKind::Signal),
        &realify(x_t, RealKind::Signal),
        params,
        z_update,
        constellation,
    )
}

#[cfg(test)]
mod tests {
    use super::super::ParamMode;
    use super::*;
    use crate::detectors::{jed_admm, AdmmConfig};
    use crate::model::LinkScenario;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Instance {
        y: RealMat,
        x_t: RealMat,
        x_d: RealMat,
        noise_ratio: f64,
    }

    fn instance(n: usize, k: usize, t_d: usize, snr_db: f64, seed: u64) -> Instance {
        let sc = LinkScenario::iid(n, k, t_d);
        let r = sc.realize(snr_db, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        Instance {
            y: realify(&r.y, RealKind::Signal),
            x_t: realify(&r.x_t, RealKind::Signal),
            x_d: realify(&r.x_d, RealKind::Signal),
            noise_ratio: sc.noise_ratio(snr_db).unwrap(),
        }
    }

    #[test]
    fn structure_map_matches_channel_form_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = ComplexMat::from_fn(3, 5, |_, _| Complex64::new(rng.random(), rng.random()));
        let b = ComplexMat::from_fn(2, 5, |_, _| Complex64::new(rng.random(), rng.random()));
        let ra = realify(&a, RealKind::Signal);
        let rb = realify(&b, RealKind::Signal);
        let lhs = complex_structure(&ra.mul_adj(&rb).unwrap());
        let rhs = realify(&a.mul_adj(&b).unwrap(), RealKind::Channel);
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn projection_variant_matches_admm_decisions() {
        let q = Constellation::qpsk();
        for seed in 0..5 {
            let sc = LinkScenario::iid(6, 4, 24);
            let r = sc.realize(12.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let ratio = sc.noise_ratio(12.0).unwrap();
            let cfg = AdmmConfig {
                rho: ratio,
                noise_ratio: ratio,
                iterations: 6,
                box_radius: 1.0,
            };
            let admm = jed_admm(&r.y, &r.x_t, &cfg, &q).unwrap();
            let params = UnfoldedParams::admm_equivalent(ParamMode::Unshared, 6, ratio, ratio);
            let (x_hat, h_hat) =
                infer_complex(&r.y, &r.x_t, &params, ZUpdate::Project { radius: 1.0 }, &q).unwrap();
            assert_eq!(x_hat, admm.x_hat);
            assert!(h_hat.max_abs_diff(&admm.h_hat) < 1e-9);
        }
    }

    #[test]
    fn tanh_saturates_at_theta_floor() {
        let inst = instance(4, 4, 8, 10.0, 3);
        let mut p = UnfoldedParams::admm_like(ParamMode::Shared, 1, inst.noise_ratio);
        p.theta[0] = 0.0;
        let out = u_admm_forward(&inst.y, &inst.x_t, &p).unwrap();
        assert!(out.trace[0].theta_clamped);
        // With one layer, X + Lambda = X; Z = sign(X) except on exact zeros.
        let (_, tape) = run(&inst.y, &inst.x_t, &p, ZUpdate::Tanh, true).unwrap();
        let t = &tape.unwrap().layers[0];
        for (&z, &x) in t.z_new.as_slice().iter().zip(t.x.as_slice()) {
            if x.abs() > 1e-3 {
                assert_eq!(z, x.signum());
            }
        }
    }

    #[test]
    fn single_layer_x_update_matches_direct_solve() {
        // Noiseless with perfect pilots: H0 = H exactly when gamma0 = 0.
        let inst = instance(4, 4, 6, 300.0, 9);
        let mut p = UnfoldedParams::admm_like(ParamMode::Unshared, 1, 1e-12);
        p.gamma0 = 0.0;
        p.rho[0] = 5.0;
        let (_, tape) = run(&inst.y, &inst.x_t, &p, ZUpdate::Tanh, true).unwrap();
        let tape = tape.unwrap();
        let h = &tape.h0;
        // Z = Lambda = 0 for the first layer: X = (H^T H + rho I)^{-1} H^T Y_d
        let mut g = h.adj_mul(h).unwrap();
        g.add_diag(5.0);
        let rhs = h.adj_mul(&tape.y_d).unwrap();
        let direct = crate::linalg::solve_hpd(&g, &rhs).unwrap();
        assert!(tape.layers[0].x.max_abs_diff(&direct) < 1e-12);
        // the blend shrinks the exact symbols toward zero
        let ls = crate::linalg::solve_hpd(&h.adj_mul(h).unwrap(), &rhs).unwrap();
        assert!(ls.max_abs_diff(&inst.x_d) < 1e-9);
        assert!(direct.frob_norm() < ls.frob_norm());
    }

    fn finite_difference(inst: &Instance, params: &UnfoldedParams, idx: usize) -> f64 {
        let base = params.to_trainable();
        let step = 1e-4 * (base[idx].abs() + 1e-3);
        let eval = |v: f64| {
            let mut p = params.clone();
            let mut t = base.clone();
            t[idx] = v;
            p.set_trainable(&t).unwrap();
            let out = u_admm_forward(&inst.y, &inst.x_t, &p).unwrap();
            loss(&inst.x_d, &out.x).unwrap()
        };
        (eval(base[idx] + step) - eval(base[idx] - step)) / (2.0 * step)
    }

    fn perturbed(mode: ParamMode, layers: usize, ratio: f64, rng: &mut ChaCha8Rng) -> UnfoldedParams {
        let mut p = UnfoldedParams::admm_like(mode, layers, ratio);
        for r in &mut p.rho {
            *r *= rng.random_range(0.5..2.0);
        }
        for t in &mut p.theta {
            *t = rng.random_range(0.4..1.5) * if rng.random_bool(0.2) { -1.0 } else { 1.0 };
        }
        for a in &mut p.alpha {
            *a = rng.random_range(0.5..1.5);
        }
        for g in &mut p.gamma {
            *g *= rng.random_range(0.5..2.0);
        }
        p.gamma0 *= rng.random_range(0.5..2.0);
        p
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for (seed, mode) in [(1, ParamMode::Shared), (2, ParamMode::Unshared)] {
            let inst = instance(4, 4, 8, 10.0, seed);
            let p = perturbed(mode, 2, inst.noise_ratio, &mut rng);
            let (_, g) = grad_params(&inst.y, &inst.x_t, &inst.x_d, &p).unwrap();
            assert_eq!(g.len(), p.trainable_count());
            for (i, &gi) in g.iter().enumerate() {
                let fd = finite_difference(&inst, &p, i);
                let ok = (gi - fd).abs() <= 1e-6 || (gi - fd).abs() <= 1e-3 * fd.abs().max(gi.abs());
                assert!(ok, "{mode:?} param {i}: analytic {gi} vs fd {fd}");
            }
        }
    }

    #[test]
    fn last_layer_dead_parameters_have_zero_gradient() {
        let inst = instance(4, 4, 8, 10.0, 5);
        let p = UnfoldedParams::admm_like(ParamMode::Unshared, 3, inst.noise_ratio);
        let (_, g) = grad_params(&inst.y, &inst.x_t, &inst.x_d, &p).unwrap();
        let l = 3;
        // theta_L, alpha_L and gamma_L only feed quantities the loss never reads
        assert_eq!(g[l + (l - 1)], 0.0);
        assert_eq!(g[2 * l + (l - 1)], 0.0);
        assert_eq!(g[3 * l + (l - 1)], 0.0);
        assert!(g[0] != 0.0);
    }

    #[test]
    fn gradient_scales_with_loss_weight() {
        let inst = instance(4, 4, 8, 10.0, 6);
        let p = UnfoldedParams::admm_like(ParamMode::Shared, 2, inst.noise_ratio);
        let (l1, g1) = grad_params_with_upstream(&inst.y, &inst.x_t, &inst.x_d, &p, 1.0).unwrap();
        let (l2, g2) = grad_params_with_upstream(&inst.y, &inst.x_t, &inst.x_d, &p, 2.0).unwrap();
        assert_eq!(l2, 2.0 * l1);
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(*b, 2.0 * a);
        }
    }

    #[test]
    fn loss_examples() {
        let a = RealMat::from_fn(4, 3, |i, j| (i * j) as f64);
        assert_eq!(loss(&a, &a).unwrap(), 0.0);
        let b = a.map(|v| v + 1.0);
        assert_eq!(loss(&a, &b).unwrap(), 12.0);
        let c = a.map(|v| v * 0.5 - 0.25);
        let naive: f64 = a.as_slice().iter().zip(c.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((loss(&a, &c).unwrap() - naive).abs() < 1e-12);
        assert!(loss(&a, &RealMat::zeros(2, 2)).is_err());
    }

    #[test]
    fn noiseless_inference_is_exact() {
        let q = Constellation::qpsk();
        let sc = LinkScenario::iid(8, 4, 32);
        let r = sc
            .realize_with_noise(0.0, &mut ChaCha8Rng::seed_from_u64(12))
            .unwrap();
        let p = UnfoldedParams::admm_equivalent(ParamMode::Shared, 3, 1e-3, 0.0);
        let (x_hat, _) = infer_complex(&r.y, &r.x_t, &p, ZUpdate::Project { radius: 1.0 }, &q).unwrap();
        assert_eq!(x_hat, r.x_d);
        let p = UnfoldedParams::admm_like(ParamMode::Shared, 3, 1e-3);
        let (x_hat, _) = infer_complex(&r.y, &r.x_t, &p, ZUpdate::Tanh, &q).unwrap();
        assert_eq!(x_hat, r.x_d);
    }
}
