use super::{HmmParams, LcState, StateSequence};

/// Most probable state path in log space. Ties go to LC1.
pub fn viterbi(p: &HmmParams, seq: &[[f64; 2]]) -> StateSequence {
    let n = seq.len();
    if n == 0 {
        return StateSequence { offset: 0, labels: vec![], log_likelihood: 0.0 };
    }
    let la = p.a.map(|row| row.map(f64::ln));
    let lb = |x: &[f64; 2]| [p.emissions[0].log_pdf(x), p.emissions[1].log_pdf(x)];
    let b0 = lb(&seq[0]);
    let mut delta = [p.pi[0].ln() + b0[0], p.pi[1].ln() + b0[1]];
    let mut back = vec![[0u8; 2]; n];
    for t in 1..n {
        let b = lb(&seq[t]);
        let mut next = [0.0; 2];
        for j in 0..2 {
            let from0 = delta[0] + la[0][j];
            let from1 = delta[1] + la[1][j];
            let (i, v) = if from1 > from0 { (1, from1) } else { (0, from0) };
            back[t][j] = i;
            next[j] = v + b[j];
        }
        delta = next;
    }
    let mut s = if delta[1] > delta[0] { 1 } else { 0 };
    let log_likelihood = delta[s];
    let mut labels = vec![LcState::LC1; n];
    for t in (0..n).rev() {
        labels[t] = LcState::from_index(s);
        s = back[t][s] as usize;
    }
    StateSequence { offset: 0, labels, log_likelihood }
}

#[cfg(test)]
mod tests {
    use super::super::Gaussian2;
    use super::*;

    #[test]
    fn symmetric_model_ties_to_lc1() {
        let g = Gaussian2::new([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]);
        let p = HmmParams { pi: [0.5, 0.5], a: [[0.5, 0.5], [0.5, 0.5]], emissions: [g, g] };
        let s = viterbi(&p, &[[0.3, 0.3]; 7]);
        assert!(s.labels.iter().all(|&l| l == LcState::LC1));
    }

    #[test]
    fn follows_clear_signal() {
        let p = HmmParams {
            pi: [0.5, 0.5],
            a: [[0.9, 0.1], [0.1, 0.9]],
            emissions: [
                Gaussian2::new([0.0, 0.0], [[0.1, 0.0], [0.0, 0.1]]),
                Gaussian2::new([3.0, 3.0], [[0.1, 0.0], [0.0, 0.1]]),
            ],
        };
        let seq = [[0.0, 0.1], [0.1, 0.0], [3.0, 2.9], [3.1, 3.0], [0.0, 0.0]];
        let s = viterbi(&p, &seq);
        use LcState::*;
        assert_eq!(s.labels, vec![LC1, LC1, LC2, LC2, LC1]);
    }
}
