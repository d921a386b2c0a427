use super::{check_shapes, top_k, DecoderKind, DecoderOutput};
use crate::model::{ActivitySet, MeasurementVector, PreambleMatrix};
use crate::Result;

/// Noisy COMP: rank devices by the fraction of their On-slots that read 1.
///
/// Devices that never transmit score `-inf` and are ranked last.
pub fn ncomp_decode(
    z: &MeasurementVector,
    preambles: &PreambleMatrix,
    k: usize,
) -> Result<DecoderOutput> {
    check_shapes(z, preambles)?;
    let ell = preambles.devices();
    let mut on = vec![0usize; ell];
    let mut hits = vec![0usize; ell];
    for (row, &bit) in preambles.rows().zip(z.bits()) {
        for (i, _) in row.iter().enumerate().filter(|(_, &x)| x) {
            on[i] += 1;
            hits[i] += bit as usize;
        }
    }
    let scores: Vec<f64> = on
        .iter()
        .zip(&hits)
        .map(|(&g, &r)| {
            if g == 0 {
                f64::NEG_INFINITY
            } else {
                r as f64 / g as f64
            }
        })
        .collect();
    let estimate = ActivitySet::new(ell, top_k(&scores, k.min(ell)))?;
    Ok(DecoderOutput {
        estimate,
        scores,
        decoder: DecoderKind::Ncomp,
        converged: None,
    })
}
