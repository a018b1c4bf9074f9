use crate::error::{Error, Result};

/// Maps every column onto the mean order statistics across columns. Tied
/// values within a column receive the mean of the reference values over the
/// positions they occupy.
pub fn quantile_normalize(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = columns.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::input("quantile normalization needs columns of equal length"));
    }
    let orders: Vec<Vec<usize>> = columns
        .iter()
        .map(|c| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| c[a].total_cmp(&c[b]));
            idx
        })
        .collect();
    let m = columns.len() as f64;
    let reference: Vec<f64> =
        (0..n).map(|r| columns.iter().zip(&orders).map(|(c, o)| c[o[r]]).sum::<f64>() / m).collect();

    Ok(columns
        .iter()
        .zip(&orders)
        .map(|(c, order)| {
            let mut out = vec![0.0; n];
            let mut r = 0;
            while r < n {
                let mut end = r + 1;
                while end < n && c[order[end]] == c[order[r]] {
                    end += 1;
                }
                let v = reference[r..end].iter().sum::<f64>() / (end - r) as f64;
                for &i in &order[r..end] {
                    out[i] = v;
                }
                r = end;
            }
            out
        })
        .collect())
}
