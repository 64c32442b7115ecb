//! Closed-form primitives of `ρ(τ) = √(α² + r²τ²)` and related functions on
//! `[0, T]`. All are even in `τ`, so a negative `T` is read as `|T|`.

/// `ρ(τ) = √(α² + r²τ²)`.
pub fn rho(alpha: f64, r: f64, tau: f64) -> f64 {
    alpha.hypot(r * tau)
}

/// `∫₀ᵀ r/ρ dτ = Argsh(rT/α)`; `None` at `α = 0` where it diverges.
pub fn int_r_over_rho(alpha: f64, r: f64, t: f64) -> Option<f64> {
    let t = t.abs();
    if alpha == 0.0 {
        return if t == 0.0 { Some(0.0) } else { None };
    }
    Some((r * t / alpha.abs()).asinh())
}

/// `∫₀ᵀ rα²/ρ³ dτ = rT/ρ(T)`.
pub fn int_r_alpha2_over_rho3(alpha: f64, r: f64, t: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        return 0.0;
    }
    r * t / rho(alpha, r, t)
}

/// `∫₀ᵀ τ/ρ dτ = (ρ(T) - |α|)/r²`.
pub fn int_tau_over_rho(alpha: f64, r: f64, t: f64) -> f64 {
    (rho(alpha, r, t) - alpha.abs()) / (r * r)
}

/// `∫₀ᵀ r|τ|/ρ dτ = (ρ(T) - |α|)/r`.
pub fn int_r_abs_tau_over_rho(alpha: f64, r: f64, t: f64) -> f64 {
    (rho(alpha, r, t) - alpha.abs()) / r
}

/// `∫₀ᵀ Argsh(rτ/α) dτ = T Argsh(rT/α) - (ρ(T) - |α|)/r`, 0 at `α = 0`
/// (the integrand is then read as the vanishing `α·Argsh` products).
pub fn int_argsh(alpha: f64, r: f64, t: f64) -> f64 {
    let t = t.abs();
    if alpha == 0.0 {
        return 0.0;
    }
    t * (r * t / alpha.abs()).asinh() - (rho(alpha, r, t) - alpha.abs()) / r
}

/// `∫₀ᵀ ρ dτ = (Tρ(T) + (α²/r) Argsh(rT/α)) / 2`.
pub fn int_rho(alpha: f64, r: f64, t: f64) -> f64 {
    let t = t.abs();
    let tail = if alpha == 0.0 {
        0.0
    } else {
        alpha * alpha / r * (r * t / alpha.abs()).asinh()
    };
    0.5 * (t * rho(alpha, r, t) + tail)
}

/// `h_α(τ) = ln(r|τ| + ρ(τ))`; `None` at `α = τ = 0`.
pub fn h_alpha(alpha: f64, r: f64, tau: f64) -> Option<f64> {
    let s = r * tau.abs() + rho(alpha, r, tau);
    if s == 0.0 {
        None
    } else {
        Some(s.ln())
    }
}

/// `∫₀ᵀ h_α dτ = T ln(rT + ρ(T)) - ρ(T)/r + |α|/r`. At `α = 0` this is
/// `T ln(2rT) - T`.
pub fn int_h_alpha(alpha: f64, r: f64, t: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        return 0.0;
    }
    let rh = rho(alpha, r, t);
    t * (r * t + rh).ln() - rh / r + alpha.abs() / r
}
