use rand::Rng as _;
use serde::Serialize;

use crate::design::FunctionSystem;
use crate::error::{invalid, Result};
use crate::mc;
use crate::scalar::Real;

/// Rademacher signs `ε_i` and the induced `ξ_k = (1/n) Σ_i ψ_k(x_i) ε_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RademacherDraw<T> {
    pub signs: Vec<i8>,
    pub xi: Vec<T>,
}

impl<T: Real> RademacherDraw<T> {
    pub fn from_signs(system: &FunctionSystem<T>, signs: Vec<i8>) -> Result<Self> {
        if signs.len() != system.n() {
            return Err(crate::error::Error::DimensionMismatch { expected: system.n(), got: signs.len() });
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(invalid("Rademacher signs must be +1 or -1"));
        }
        let w: Vec<T> = signs.iter().map(|&s| T::lit(s as f64)).collect();
        let xi = system.correlate(&w)?;
        Ok(Self { signs, xi })
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.xi)
    }
}

pub fn random_signs(n: usize, rng: &mut mc::Rng) -> Vec<i8> {
    (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
}

/// Draws i.i.d. uniform signs from a generator seeded with `seed`.
pub fn draw_xi<T: Real>(system: &FunctionSystem<T>, seed: u64) -> RademacherDraw<T> {
    let mut rng = mc::rng_from_seed(seed);
    let signs = random_signs(system.n(), &mut rng);
    RademacherDraw::from_signs(system, signs).expect("sign vector matches the system")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::build_tv_system;

    #[test]
    fn forced_and_flipped_signs() {
        let sys = build_tv_system::<f64>(16, 4).unwrap();
        let plus = RademacherDraw::from_signs(&sys, vec![1; 16]).unwrap();
        for k in 0..4 {
            let mean: f64 = sys.row(k).iter().sum::<f64>() / 16.0;
            assert!((plus.xi[k] - mean).abs() < 1e-15);
        }
        let d = draw_xi(&sys, 9);
        let flipped: Vec<i8> = d.signs.iter().map(|s| -s).collect();
        let f = RademacherDraw::from_signs(&sys, flipped).unwrap();
        for (a, b) in d.xi.iter().zip(&f.xi) {
            assert_eq!(*a, -*b);
        }
        assert!(RademacherDraw::from_signs(&sys, vec![0; 16]).is_err());
        assert!(RademacherDraw::from_signs(&sys, vec![1; 3]).is_err());
    }
}
