/// Magnitude cap applied to [`si_snr`], in dB.
pub const SI_SNR_CAP_DB: f64 = 40.0;

/// Scale-invariant SNR of `estimate` against `reference`, capped at
/// +/-40 dB. The estimate is projected onto the reference; the projection is
/// the target and the remainder the residual.
pub fn si_snr(reference: &[f64], estimate: &[f64]) -> crate::Result<f64> {
    if reference.is_empty() || reference.len() != estimate.len() {
        return crate::error::arg_err(format!(
            "si_snr: lengths {} and {}",
            reference.len(),
            estimate.len()
        ));
    }
    let energy: f64 = reference.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return crate::error::arg_err("si_snr: reference has zero energy");
    }
    let dot: f64 = reference.iter().zip(estimate).map(|(a, b)| a * b).sum();
    let alpha = dot / energy;
    let mut target = 0.0;
    let mut residual = 0.0;
    for (&r, &e) in reference.iter().zip(estimate) {
        let t = alpha * r;
        target += t * t;
        residual += (e - t) * (e - t);
    }
    let db = if target == 0.0 {
        -SI_SNR_CAP_DB
    } else if residual == 0.0 {
        SI_SNR_CAP_DB
    } else {
        10.0 * (target / residual).log10()
    };
    Ok(db.clamp(-SI_SNR_CAP_DB, SI_SNR_CAP_DB))
}

/// Plain SNR of `signal` against additive `noise`, in dB.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    let ps: f64 = signal.iter().map(|v| v * v).sum();
    let pn: f64 = noise.iter().map(|v| v * v).sum();
    10.0 * (ps / pn).log10()
}
