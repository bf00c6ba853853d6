use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Grid, MetricField};
use crate::tensor::Tensor;

/// A target metric rebuilt from `a_ij`, with the `Ψ` it implies.
#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    pub gbar: Tensor<2>,
    pub psi: f64,
}

/// Forward map: `a_ij = e^{2Ψ} ḡ^{αβ} g_αi g_βj` and
/// `Ψ = ln |det ḡ / det g| / (2(n+1))`. `None` if either metric is singular.
pub fn a_from(g: &Tensor<2>, gbar: &Tensor<2>) -> Option<(Tensor<2>, f64)> {
    let n = g.dim();
    let (gm, gbm) = (g.to_matrix(), gbar.to_matrix());
    let (det, detb) = (gm.determinant(), gbm.determinant());
    if det == 0.0 || detb == 0.0 {
        return None;
    }
    let psi = (detb.abs().ln() - det.abs().ln()) / (2.0 * (n as f64 + 1.0));
    let a = (2.0 * psi).exp() * (&gm * gbm.try_inverse()? * &gm);
    Some((Tensor::from_matrix(&a), psi))
}

/// Inverse map: `g̃ = (g^{iα} g^{jβ} a_αβ)^{-1}`, `Ψ = ½ ln |det g̃ / det g|`,
/// `ḡ = e^{2Ψ} g̃`. `None` when `g^{-1} a` is numerically singular.
pub fn reconstruct_gbar(g: &Tensor<2>, a: &Tensor<2>) -> Option<Reconstruction> {
    let n = g.dim();
    let gm = g.to_matrix();
    let ginv = gm.clone().try_inverse()?;
    let mixed = &ginv * a.to_matrix();
    let scale = mixed.amax().powi(n as i32);
    let det_mixed = mixed.determinant();
    if !(det_mixed.is_finite() && det_mixed.abs() > 1e-12 * scale && scale > 0.0) {
        return None;
    }
    let upper = &mixed * &ginv;
    let tilde = upper.try_inverse()?;
    let psi = 0.5 * (tilde.determinant().abs().ln() - gm.determinant().abs().ln());
    let gbar = (2.0 * psi).exp() * tilde;
    // symmetrize away roundoff from the inversions
    let gbar = 0.5 * (&gbar + gbar.transpose());
    Some(Reconstruction {
        gbar: Tensor::from_matrix(&gbar),
        psi,
    })
}

/// [`reconstruct_gbar`] at every grid point, with `a` given per point.
pub fn reconstruct_field(g: &MetricField, a: &[Tensor<2>], grid: &Grid) -> Result<Vec<Reconstruction>> {
    assert_eq!(a.len(), grid.len(), "one a-value per grid point");
    grid.points
        .iter()
        .zip(a)
        .map(|(p, a)| {
            let gv = g.eval(p)?;
            reconstruct_gbar(&gv, a).ok_or_else(|| Error::DegenerateSolution { point: p.clone() })
        })
        .collect()
}
