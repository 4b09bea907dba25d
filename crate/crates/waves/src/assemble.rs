//! From potential to wave: the double curl.
//!
//! Taking the wave as the discrete double curl of its potential makes the
//! divergence vanish identically at scheme level (difference operators on
//! the zero-extended lattice commute) and kills both the integral and the
//! angular moment of the wave, which is what lets later stages solve for
//! compactly supported stress tensors.

use fields_core::{deriv::curl, deriv::divergence, ComplexVectorField, VectorField};

use crate::{amplitude::WaveAmplitude, WaveError, WaveIndex};

pub struct Wave {
    pub index: WaveIndex,
    /// The wave `∇×∇×(potential)`.
    pub v: ComplexVectorField,
    /// Intermediate curl `∇×(potential)`.
    pub w: ComplexVectorField,
    /// `‖div v‖∞ / (λ ‖v‖∞)`, zero divided as zero.
    pub div_ratio: f64,
}

pub fn assemble_wave(amp: &WaveAmplitude) -> Result<Wave, WaveError> {
    let w = ComplexVectorField {
        re: curl(&amp.pot.re),
        im: curl(&amp.pot.im),
    };
    let v = ComplexVectorField {
        re: curl(&w.re),
        im: curl(&w.im),
    };
    let div_sup = divergence(&v.re)?
        .sup_norm()
        .max(divergence(&v.im)?.sup_norm());
    let sup = v.sup_norm();
    let div_ratio = if sup > 0.0 {
        div_sup / (amp.lambda * sup)
    } else {
        0.0
    };
    Ok(Wave {
        index: amp.index,
        v,
        w,
        div_ratio,
    })
}

/// Sum a conjugate-closed family into the real correction field.  Returns
/// the real part of the sum and the sup norm of its imaginary residue,
/// which measures how exactly the family pairs off.
pub fn real_correction(waves: &[Wave]) -> (VectorField, f64) {
    assert!(!waves.is_empty());
    let g = waves[0].v.grid().clone();
    let mut re = VectorField::zeros(&g);
    let mut im = VectorField::zeros(&g);
    for w in waves {
        re.axpy(1.0, &w.v.re);
        im.axpy(1.0, &w.v.im);
    }
    let resid = im.sup_norm();
    (re, resid)
}
