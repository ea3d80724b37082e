use super::SynthError;

/// Nearest-reference cosine distance for every generated vector, by a plain
/// double loop that recomputes both norms for every pair. Used only to
/// cross-check the metric implementation.
pub fn brute_force_dmin(gens: &[Vec<f64>], refs: &[Vec<f64>]) -> Result<Vec<f64>, SynthError> {
    if refs.is_empty() {
        return Err(SynthError::EmptyReferenceSet);
    }
    let mut out = Vec::with_capacity(gens.len());
    for g in gens {
        let mut best = f64::INFINITY;
        for r in refs {
            if r.len() != g.len() {
                return Err(SynthError::DimensionMismatch { left: g.len(), right: r.len() });
            }
            let mut gr = 0.0;
            let mut gg = 0.0;
            let mut rr = 0.0;
            for k in 0..g.len() {
                gr += g[k] * r[k];
                gg += g[k] * g[k];
                rr += r[k] * r[k];
            }
            if gg == 0.0 || rr == 0.0 {
                return Err(SynthError::ZeroNorm);
            }
            let d = (1.0 - gr / (gg * rr).sqrt()).clamp(0.0, 2.0);
            if d < best {
                best = d;
            }
        }
        out.push(best);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_reference_is_zero() {
        let v = vec![0.3, -1.2, 4.0];
        let v = std::slice::from_ref(&v);
        assert_eq!(brute_force_dmin(v, v).unwrap(), vec![0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(brute_force_dmin(&[vec![1.0]], &[]), Err(SynthError::EmptyReferenceSet)));
        assert!(matches!(brute_force_dmin(&[vec![0.0]], &[vec![1.0]]), Err(SynthError::ZeroNorm)));
    }
}
