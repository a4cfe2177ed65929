use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    /// `||r_T - f_T|| / ||f_T||` at the last sample.
    L2Final,
    /// Mean over samples of the per-instant relative error.
    L2TimeAvg,
}

fn rel(r: &[f64], f: &[f64]) -> f64 {
    let num: f64 = r.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = f.iter().map(|b| b * b).sum::<f64>().sqrt();
    if den == 0.0 {
        if num == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        num / den
    }
}

/// Relative L2 distance between two trajectories sampled at the same instants.
pub fn rom_error(rom: &[Vec<f64>], fom: &[Vec<f64>], norm: ErrorNorm) -> Result<f64> {
    if rom.len() != fom.len() || rom.is_empty() {
        return Err(Error::arg(format!("trajectories have {} and {} samples", rom.len(), fom.len())));
    }
    if rom.iter().zip(fom).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::arg("trajectory samples differ in length"));
    }
    Ok(match norm {
        ErrorNorm::L2Final => rel(rom.last().unwrap(), fom.last().unwrap()),
        ErrorNorm::L2TimeAvg => rom.iter().zip(fom).map(|(a, b)| rel(a, b)).sum::<f64>() / rom.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_zero() {
        let f = vec![vec![1.0, 2.0], vec![3.0, -1.0]];
        assert_eq!(rom_error(&f, &f, ErrorNorm::L2Final).unwrap(), 0.0);
        let z = vec![vec![0.0; 2]; 2];
        assert!((rom_error(&z, &f, ErrorNorm::L2TimeAvg).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_node_hand_case() {
        // diff (0, 1) against (3, 4): 1/5
        let r = vec![vec![3.0, 5.0]];
        let f = vec![vec![3.0, 4.0]];
        assert!((rom_error(&r, &f, ErrorNorm::L2Final).unwrap() - 0.2).abs() < 1e-15);
        // second instant: diff (1, 0) against (0, 2) gives 1/2, mean 0.35
        let r = vec![vec![3.0, 5.0], vec![1.0, 2.0]];
        let f = vec![vec![3.0, 4.0], vec![0.0, 2.0]];
        assert!((rom_error(&r, &f, ErrorNorm::L2TimeAvg).unwrap() - 0.35).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        assert!(rom_error(&[vec![1.0]], &[vec![1.0, 2.0]], ErrorNorm::L2Final).is_err());
        assert!(rom_error(&[], &[], ErrorNorm::L2Final).is_err());
    }
}
