use super::{ComplexError, FilteredComplex, FilteredSimplex, Simplex};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Vietoris–Rips filtration truncated at `max_scale` and `max_dim`.
///
/// Vertices enter at 0, edges at their Euclidean length and higher simplices
/// at the largest edge they contain.
pub fn build_rips<P: AsRef<[f64]>>(
    cloud: &[P],
    max_scale: f64,
    max_dim: usize,
) -> Result<FilteredComplex, ComplexError> {
    if cloud.is_empty() {
        return Err(ComplexError::EmptyCloud);
    }
    if !(max_scale > 0.0) {
        return Err(ComplexError::InvalidParameter(format!(
            "max_scale must be positive, got {max_scale}"
        )));
    }
    let n = cloud.len();
    let mut dist = vec![0.0; n * n];
    // Upper neighbors: j > i with d(i, j) <= max_scale.
    let mut upper: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(cloud[i].as_ref(), cloud[j].as_ref());
            dist[i * n + j] = d;
            dist[j * n + i] = d;
            if d <= max_scale {
                upper[i].push(j as u32);
            }
        }
    }

    let mut simplices = Vec::new();
    let mut stack: Vec<(Vec<u32>, f64, Vec<u32>)> = Vec::new();
    for v in 0..n as u32 {
        simplices.push(FilteredSimplex {
            simplex: Simplex(vec![v]),
            value: 0.0,
        });
        if max_dim > 0 {
            stack.push((vec![v], 0.0, upper[v as usize].clone()));
        }
        // Depth-first clique expansion over common upper neighbors.
        while let Some((verts, value, candidates)) = stack.pop() {
            for (k, &u) in candidates.iter().enumerate() {
                let new_value = verts
                    .iter()
                    .map(|&w| dist[w as usize * n + u as usize])
                    .fold(value, f64::max);
                let mut next = verts.clone();
                next.push(u);
                if next.len() <= max_dim {
                    let common: Vec<u32> = candidates[k + 1..]
                        .iter()
                        .copied()
                        .filter(|&c| upper[u as usize].binary_search(&c).is_ok())
                        .collect();
                    if !common.is_empty() {
                        stack.push((next.clone(), new_value, common));
                    }
                }
                simplices.push(FilteredSimplex {
                    simplex: Simplex(next),
                    value: new_value,
                });
            }
        }
    }
    let mut fc = FilteredComplex {
        simplices,
        max_dimension: max_dim,
    };
    fc.sort();
    Ok(fc)
}
