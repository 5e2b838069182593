//! Mesh-convergence machinery: cell-average restriction, weighted L2 error
//! and the least-squares order fit.

use crate::error::{Error, Result};

/// Restrict a fine-mesh cell field to a coarse mesh by cell averaging.
/// The fine cell count must be an integer multiple of the coarse one.
pub fn restrict_cell_average(fine: &[f64], coarse_cells: usize) -> Result<Vec<f64>> {
    if coarse_cells == 0 || fine.len() % coarse_cells != 0 {
        return Err(Error::Config(format!(
            "cannot restrict {} fine cells onto {} coarse cells",
            fine.len(),
            coarse_cells
        )));
    }
    let ratio = fine.len() / coarse_cells;
    Ok((0..coarse_cells)
        .map(|i| fine[i * ratio..(i + 1) * ratio].iter().sum::<f64>() / ratio as f64)
        .collect())
}

/// Weighted L2 norm of the difference between two cell fields:
/// `sqrt(sum h (p_i - q_i)^2)`.
pub fn l2_error(p: &[f64], q: &[f64], h: f64) -> f64 {
    assert_eq!(p.len(), q.len());
    (p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * h)
        .sqrt()
}

/// Least-squares slope of log(err) against log(dx) over at least three
/// mesh levels.
pub fn fit_order(dx: &[f64], err: &[f64]) -> Result<f64> {
    if dx.len() != err.len() || dx.len() < 3 {
        return Err(Error::Config(
            "order fit needs at least three mesh levels".into(),
        ));
    }
    if err.iter().any(|&e| e <= 0.0) {
        return Err(Error::Config(
            "order fit needs strictly positive errors".into(),
        ));
    }
    let xs: Vec<f64> = dx.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restriction_averages_cells() {
        let fine = vec![1.0, 3.0, 2.0, 4.0, 10.0, 0.0];
        let coarse = restrict_cell_average(&fine, 3).unwrap();
        assert_eq!(coarse, vec![2.0, 3.0, 5.0]);
        assert!(restrict_cell_average(&fine, 4).is_err());
    }

    #[test]
    fn identical_fields_have_zero_error() {
        let p = vec![1.0, 2.0, 3.0];
        assert_eq!(l2_error(&p, &p, 0.5), 0.0);
    }

    #[test]
    fn synthetic_first_order_sequence_fits_exactly() {
        // e(h) = C h gives slope one.
        let dx = [0.1, 0.05, 0.025, 0.0125];
        let err: Vec<f64> = dx.iter().map(|h| 3.7 * h).collect();
        let order = fit_order(&dx, &err).unwrap();
        assert!((order - 1.0).abs() < 1e-12);
        assert!(fit_order(&dx[..2], &err[..2]).is_err());
    }
}
