use crate::{Error, Result};

const MAX_ITERS: usize = 200_000;
const TOL: f64 = 1e-14;

/// Sample covariance of the mean-centered rows.
fn covariance(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = rows.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 rows, got {m}")));
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            what: "pca row",
            expected: d,
            actual: r.len(),
        });
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (mu, x) in mean.iter_mut().zip(r) {
            *mu += x;
        }
    }
    mean.iter_mut().for_each(|mu| *mu /= m as f64);
    let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(x, mu)| x - mu).collect()).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in &centered {
        for i in 0..d {
            if r[i] == 0.0 {
                continue;
            }
            for j in i..d {
                cov[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (m - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    Ok(cov)
}

fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Leading eigenvector of the covariance of `rows`, by power iteration.
///
/// The sign is fixed so that the entry of largest magnitude is positive.
pub fn first_principal_component(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let cov = covariance(rows)?;
    let d = cov.len();
    let scale = (0..d).map(|i| cov[i][i]).sum::<f64>();
    if !(scale > 0.0) {
        return Err(Error::RankZero);
    }

    let mut v = vec![1.0; d];
    normalize(&mut v);
    if normalize(&mut matvec(&cov, &v)) <= 1e-12 * scale {
        // start orthogonal to the range; restart on the largest-variance axis
        let j = (0..d).fold(0, |best, i| if cov[i][i] > cov[best][best] { i } else { best });
        v = vec![0.0; d];
        v[j] = 1.0;
    }
    for _ in 0..MAX_ITERS {
        let mut next = matvec(&cov, &v);
        normalize(&mut next);
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < TOL {
            break;
        }
    }

    let pivot = (0..d).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(v)
}

/// The `n` coordinates with the largest absolute loading on the first
/// principal component, most important first. Equal loadings (to 1e-12
/// relative) resolve to the lower index.
pub fn pca_principal_dims(rows: &[Vec<f64>], n: usize) -> Result<Vec<usize>> {
    let d = rows.first().map_or(0, Vec::len);
    if n > d {
        return Err(Error::InvalidArgument(format!("requested {n} dimensions of {d}")));
    }
    let pc = first_principal_component(rows)?;
    let top = pc.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut idx: Vec<(i64, usize)> = pc
        .iter()
        .enumerate()
        .map(|(i, x)| ((x.abs() / top * 1e12).round() as i64, i))
        .collect();
    idx.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(idx.into_iter().take(n).map(|(_, i)| i).collect())
}
