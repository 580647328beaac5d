use std::fmt;

use serde::Serialize;

/// A full contraction `tr(∇^{s_1}R ⊗ .. ⊗ ∇^{s_p}R)`.
///
/// Slots are numbered consecutively over the factors. Factor `f` owns
/// `4 + s_f` slots: slot 0 of the factor is the contravariant index of
/// `R^l_kij`, slots 1..=3 are `k, i, j`, and the rest are the derivative
/// slots in the order the derivatives were taken. Each pair in `pairing`
/// is contracted, through `g⁻¹` when both slots are covariant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct InvariantSpec {
    factors: Vec<usize>,
    pairing: Vec<(usize, usize)>,
}

/// Signed permutations of the four curvature slots generated by
/// `l <-> k` (−), `i <-> j` (−) and `(lk) <-> (ij)` (+).
const CURVATURE_SYMMETRIES: [([usize; 4], i8); 8] = [
    ([0, 1, 2, 3], 1),
    ([1, 0, 2, 3], -1),
    ([0, 1, 3, 2], -1),
    ([1, 0, 3, 2], 1),
    ([2, 3, 0, 1], 1),
    ([3, 2, 0, 1], -1),
    ([2, 3, 1, 0], -1),
    ([3, 2, 1, 0], 1),
];

impl InvariantSpec {
    /// Builds a spec after checking the pairing is a perfect matching on
    /// the factors' slots. The result is not canonicalized.
    pub fn new(factors: Vec<usize>, pairing: Vec<(usize, usize)>) -> Option<Self> {
        let slots: usize = factors.iter().map(|s| 4 + s).sum();
        let mut seen = vec![false; slots];
        for &(a, b) in &pairing {
            if a == b || a >= slots || b >= slots || seen[a] || seen[b] {
                return None;
            }
            seen[a] = true;
            seen[b] = true;
        }
        if seen.iter().any(|s| !s) {
            return None;
        }
        let mut spec = InvariantSpec { factors, pairing };
        spec.pairing = normalize(&spec.pairing);
        Some(spec)
    }

    /// `R^i_kij g^kj`.
    pub fn scalar_curvature() -> Self {
        InvariantSpec { factors: vec![0], pairing: vec![(0, 2), (1, 3)] }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn pairing(&self) -> &[(usize, usize)] {
        &self.pairing
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn total_order(&self) -> usize {
        self.factors.iter().sum()
    }

    pub fn slot_count(&self) -> usize {
        self.factors.iter().map(|s| 4 + s).sum()
    }

    /// First slot of each factor.
    pub fn factor_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.factors
            .iter()
            .map(|s| {
                let o = off;
                off += 4 + s;
                o
            })
            .collect()
    }

    /// Exponent `e` in `w(c·g) = c^e · w(g)` for constant `c > 0`.
    ///
    /// Every lowered factor scales like `c` and every contraction brings a
    /// `c⁻¹`, so `e = p − #pairs = −(p + Σs/2)`.
    pub fn scaling_exponent(&self) -> i32 {
        self.factors.len() as i32 - self.pairing.len() as i32
    }

    /// The lexicographically least signed image of the pairing under the
    /// curvature symmetries of every factor and permutations of factors of
    /// equal order. The sign is `None` when the contraction vanishes
    /// identically by those symmetries.
    pub fn canonical(&self) -> (Vec<(usize, usize)>, Option<i8>) {
        let offsets = self.factor_offsets();
        let p = self.factors.len();
        let perms: Vec<Vec<usize>> = permutations(p)
            .into_iter()
            .filter(|perm| (0..p).all(|f| self.factors[perm[f]] == self.factors[f]))
            .collect();
        let mut best: Option<(Vec<(usize, usize)>, i8)> = None;
        let mut vanishes = false;
        let mut choice = vec![0usize; p];
        let mut map = vec![0usize; self.slot_count()];
        loop {
            let sign: i8 = choice.iter().map(|&c| CURVATURE_SYMMETRIES[c].1).product();
            for perm in &perms {
                // slot r of factor f goes to slot σ_f(r) of factor perm[f]
                for f in 0..p {
                    let (sigma, _) = CURVATURE_SYMMETRIES[choice[f]];
                    for r in 0..4 + self.factors[f] {
                        let target = if r < 4 { sigma[r] } else { r };
                        map[offsets[f] + r] = offsets[perm[f]] + target;
                    }
                }
                let image = normalize(&self.pairing.iter().map(|&(a, b)| (map[a], map[b])).collect::<Vec<_>>());
                match &best {
                    Some((b, s)) if image == *b => {
                        if *s != sign {
                            vanishes = true;
                        }
                    }
                    Some((b, _)) if image > *b => {}
                    _ => best = Some((image, sign)),
                }
            }
            // odometer over per-factor symmetry choices
            let mut f = 0;
            loop {
                if f == p {
                    let (pairing, sign) = best.expect("at least the identity");
                    return (pairing, if vanishes { None } else { Some(sign) });
                }
                choice[f] += 1;
                if choice[f] < CURVATURE_SYMMETRIES.len() {
                    break;
                }
                choice[f] = 0;
                f += 1;
            }
        }
    }

    /// A stable textual key, `s_1,..,s_p|a-b,c-d,..`, of the canonical form.
    pub fn key(&self) -> String {
        let (pairing, _) = self.canonical();
        format_key(&self.factors, &pairing)
    }

    pub fn is_scalar_curvature(&self) -> bool {
        *self == InvariantSpec::scalar_curvature()
    }
}

fn format_key(factors: &[usize], pairing: &[(usize, usize)]) -> String {
    let f: Vec<String> = factors.iter().map(|s| s.to_string()).collect();
    let p: Vec<String> = pairing.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    format!("{}|{}", f.join(","), p.join(","))
}

impl fmt::Display for InvariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_scalar_curvature() {
            return f.write_str("scal");
        }
        f.write_str(&format_key(&self.factors, &self.pairing))
    }
}

fn normalize(pairs: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    out.sort_unstable();
    out
}

fn permutations(p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(p - 1) {
        for pos in 0..=rest.len() {
            let mut v = rest.clone();
            v.insert(pos, p - 1);
            out.push(v);
        }
    }
    out.sort();
    out
}

/// Every perfect matching on `0..slots`, in lexicographic order.
pub(crate) fn perfect_matchings(slots: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(free: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free.remove(0);
        for k in 0..free.len() {
            let b = free.remove(k);
            cur.push((a, b));
            go(free, cur, out);
            cur.pop();
            free.insert(k, b);
        }
        free.insert(0, a);
    }
    let mut out = Vec::new();
    if slots.is_multiple_of(2) {
        go(&mut (0..slots).collect(), &mut Vec::new(), &mut out);
    }
    out
}

/// Non-decreasing factor sequences with `p <= max_factors`,
/// `Σs <= max_order` and an even total slot count.
pub(crate) fn factor_sequences(max_order: usize, max_factors: usize) -> Vec<Vec<usize>> {
    fn go(p: usize, min: usize, budget: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            if cur.iter().sum::<usize>().is_multiple_of(2) {
                out.push(cur.clone());
            }
            return;
        }
        for s in min..=budget {
            cur.push(s);
            go(p, s, budget - s, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for p in 1..=max_factors {
        go(p, 0, max_order, &mut Vec::new(), &mut out);
    }
    out
}

/// Canonical representatives of every non-vanishing pairing for the given
/// factors, in key order.
pub(crate) fn canonical_pairings(factors: &[usize]) -> Vec<InvariantSpec> {
    let slots: usize = factors.iter().map(|s| 4 + s).sum();
    let mut reps = std::collections::BTreeMap::new();
    for pairing in perfect_matchings(slots) {
        let spec = InvariantSpec { factors: factors.to_vec(), pairing: normalize(&pairing) };
        let (canon, sign) = spec.canonical();
        if sign.is_some() {
            reps.entry(canon.clone()).or_insert(InvariantSpec { factors: factors.to_vec(), pairing: canon });
        }
    }
    reps.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matchings_count_double_factorial() {
        assert_eq!(perfect_matchings(4).len(), 3);
        assert_eq!(perfect_matchings(6).len(), 15);
        assert_eq!(perfect_matchings(8).len(), 105);
        assert!(perfect_matchings(5).is_empty());
    }

    #[test]
    fn single_curvature_factor() {
        // the three pairings of R: (lk)(ij) vanishes, (li)(kj) is scal, (lj)(ki) is −scal
        let reps = canonical_pairings(&[0]);
        assert_eq!(reps, vec![InvariantSpec::scalar_curvature()]);
        let minus = InvariantSpec::new(vec![0], vec![(0, 3), (1, 2)]).unwrap();
        assert_eq!(minus.canonical(), (vec![(0, 2), (1, 3)], Some(-1)));
        let zero = InvariantSpec::new(vec![0], vec![(0, 1), (2, 3)]).unwrap();
        assert_eq!(zero.canonical().1, None);
    }

    #[test]
    fn factor_sequences_respect_parity() {
        assert_eq!(factor_sequences(1, 2), vec![vec![0], vec![0, 0]]);
        assert_eq!(factor_sequences(2, 2), vec![vec![0], vec![2], vec![0, 0], vec![0, 2], vec![1, 1]]);
    }

    #[test]
    fn scaling_and_validation() {
        assert_eq!(InvariantSpec::scalar_curvature().scaling_exponent(), -1);
        let rr = InvariantSpec::new(vec![0, 0], vec![(0, 4), (1, 5), (2, 6), (3, 7)]).unwrap();
        assert_eq!(rr.scaling_exponent(), -2);
        assert!(InvariantSpec::new(vec![0], vec![(0, 1), (1, 2)]).is_none());
        assert!(InvariantSpec::new(vec![0], vec![(0, 1)]).is_none());
    }

    #[test]
    fn key_is_invariant_under_symmetries() {
        let a = InvariantSpec::new(vec![0, 0], vec![(0, 4), (1, 5), (2, 6), (3, 7)]).unwrap();
        let b = InvariantSpec::new(vec![0, 0], vec![(1, 4), (0, 5), (2, 6), (3, 7)]).unwrap();
        let c = InvariantSpec::new(vec![0, 0], vec![(4, 2), (5, 3), (6, 0), (7, 1)]).unwrap();
        assert_eq!(a.key(), b.key());
        assert_eq!(a.key(), c.key());
        assert_eq!(a.canonical().1, Some(1));
        assert_eq!(b.canonical().1, Some(-1));
    }
}
