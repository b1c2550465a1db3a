use crate::classical::demosaic_bilinear;
use crate::color::{Illuminant, Matrix3};
use crate::error::{Error, Result};
use crate::image::{srgb_degamma, Image};
use crate::rawsim::RawFrame;

/// Angle between two illuminant directions, in degrees.
pub fn angular_error(est: &Illuminant, gt: &Illuminant) -> f64 {
    let (a, b) = (est.rgb(), gt.rgb());
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    dot.clamp(-1.0, 1.0).acos().to_degrees()
}

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::shape(format!(
            "images differ in size: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

fn sq_err(pred: &Image, reference: &Image) -> f64 {
    pred.data()
        .iter()
        .zip(reference.data())
        .map(|(&p, &r)| (p as f64 - r as f64).powi(2))
        .sum()
}

/// Peak signal-to-noise ratio with peak 1 over all channels; `+inf` for
/// identical images.
pub fn psnr(pred: &Image, reference: &Image) -> Result<f64> {
    check_dims(pred, reference)?;
    let mse = sq_err(pred, reference) / pred.data().len().max(1) as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    })
}

/// Signal-to-error power ratio of one image, in dB.
pub fn image_snr(pred: &Image, reference: &Image) -> Result<f64> {
    check_dims(pred, reference)?;
    let signal: f64 = reference.data().iter().map(|&r| (r as f64).powi(2)).sum();
    if signal == 0.0 {
        return Err(Error::Degenerate("SNR reference is all zero".into()));
    }
    let err = sq_err(pred, reference);
    Ok(if err == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / err).log10()
    })
}

/// Arithmetic mean of per-image SNRs over `(pred, reference)` pairs.
pub fn mean_snr<'a>(pairs: impl IntoIterator<Item = (&'a Image, &'a Image)>) -> Result<f64> {
    let vals = pairs
        .into_iter()
        .map(|(p, r)| image_snr(p, r))
        .collect::<Result<Vec<f64>>>()?;
    if vals.is_empty() {
        return Err(Error::Degenerate("mean SNR of an empty set".into()));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Illuminant implied by a reconstruction: per channel the mean of the
/// linear input over the mean of the linearized output, the latter taken
/// back to device space with `to_device`.
pub fn implied_illuminant(linear_input: &Image, output: &Image, to_device: &Matrix3) -> Result<Illuminant> {
    check_dims(linear_input, output)?;
    let lin = srgb_degamma(output)?;
    let n = (lin.width() * lin.height()) as f64;
    let mut out_mean = [0.0f64; 3];
    for i in 0..lin.width() * lin.height() {
        let v = to_device.apply([0, 1, 2].map(|c| lin.plane(c)[i] as f64));
        for c in 0..3 {
            out_mean[c] += v[c] / n;
        }
    }
    let mut rho = [0.0; 3];
    for c in 0..3 {
        let in_mean = linear_input.plane(c).iter().map(|&v| v as f64).sum::<f64>() / n;
        if !(in_mean > 0.0 && out_mean[c] > 0.0) {
            return Err(Error::Degenerate(format!(
                "channel {c} has zero mean (input {in_mean}, output {})",
                out_mean[c]
            )));
        }
        rho[c] = in_mean / out_mean[c];
    }
    Illuminant::new(rho)
}

/// [`implied_illuminant`] with the input side linearized by bilinear
/// demosaicing of the raw and the device matrix recorded in the raw.
pub fn implied_illuminant_from_raw(raw: &RawFrame, output: &Image) -> Result<Illuminant> {
    let lin = demosaic_bilinear(raw)?;
    implied_illuminant(&lin, output, &raw.meta.device_matrix)
}
