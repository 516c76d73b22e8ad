use leuvenshtein::oracle::{banded_distance, cell_reference, diff_matrices, wf_distance};
use proptest::prelude::*;

fn word(alphabet: &'static str, max: usize) -> impl Strategy<Value = Vec<char>> {
    let chars: Vec<char> = alphabet.chars().collect();
    prop::collection::vec(prop::sample::select(chars), 0..=max)
}

/// A monotone lattice path from (0,0) to (m,n) as a down/right step list.
fn path(m: usize, n: usize) -> impl Strategy<Value = Vec<bool>> {
    Just([vec![true; m], vec![false; n]].concat()).prop_shuffle()
}

fn pair_and_path() -> impl Strategy<Value = (Vec<char>, Vec<char>, Vec<bool>)> {
    (word("abc", 10), word("abc", 10)).prop_flat_map(|(a, b)| {
        let (m, n) = (a.len(), b.len());
        (Just(a), Just(b), path(m, n))
    })
}

// Independent recursive definition, memoized on prefix lengths.
fn recursive_distance(a: &[char], b: &[char]) -> u32 {
    fn go(a: &[char], b: &[char], memo: &mut Vec<Vec<Option<u32>>>) -> u32 {
        let (i, j) = (a.len(), b.len());
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == 0 {
            j as u32
        } else if j == 0 {
            i as u32
        } else {
            let sub = go(&a[..i - 1], &b[..j - 1], memo) + u32::from(a[i - 1] != b[j - 1]);
            let del = go(&a[..i - 1], b, memo) + 1;
            let ins = go(a, &b[..j - 1], memo) + 1;
            sub.min(del).min(ins)
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, &mut memo)
}

proptest! {
    #[test]
    fn matrix_invariants((a, b) in (word("abcd", 12), word("abcd", 12))) {
        let (d, mat) = wf_distance(&a, &b);
        prop_assert_eq!(d, recursive_distance(&a, &b));
        for i in 0..=a.len() {
            prop_assert_eq!(mat.get(i, 0), i as u32);
        }
        for j in 0..=b.len() {
            prop_assert_eq!(mat.get(0, j), j as u32);
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let x = mat.get(i, j) as i64;
                prop_assert!((x - mat.get(i - 1, j) as i64).abs() <= 1);
                prop_assert!((x - mat.get(i, j - 1) as i64).abs() <= 1);
                prop_assert!((0..=1).contains(&(x - mat.get(i - 1, j - 1) as i64)));
            }
        }
    }

    #[test]
    fn every_path_sums_to_distance((a, b, steps) in pair_and_path()) {
        let diffs = diff_matrices(&a, &b);
        prop_assert_eq!(diffs.path_sum(&steps), wf_distance(&a, &b).0 as i64);
    }

    #[test]
    fn differentials_follow_cell_formula((a, b) in (word("ab", 10), word("ab", 10))) {
        let diffs = diff_matrices(&a, &b);
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let eq = u8::from(a[i - 1] == b[j - 1]);
                let (dv, dh) = cell_reference(eq, diffs.dv(i, j - 1), diffs.dh(i - 1, j)).unwrap();
                prop_assert_eq!(dv, diffs.dv(i, j));
                prop_assert_eq!(dh, diffs.dh(i, j));
            }
        }
    }

    #[test]
    fn metric_axioms((a, b, c) in (word("abc", 8), word("abc", 8), word("abc", 8))) {
        let d = |x: &[char], y: &[char]| wf_distance(x, y).0;
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert!(d(&a, &b) >= a.len().abs_diff(b.len()) as u32);
        prop_assert!(d(&a, &b) <= a.len().max(b.len()) as u32);
    }

    #[test]
    fn banded_bounds((a, b, hw) in (word("abc", 12), word("abc", 12), 0usize..14)) {
        let truth = wf_distance(&a, &b).0;
        match banded_distance(&a, &b, hw) {
            Ok(banded) => {
                prop_assert!(hw >= a.len().abs_diff(b.len()));
                prop_assert!(banded >= truth);
                if truth as usize <= hw {
                    prop_assert_eq!(banded, truth);
                }
            }
            Err(_) => prop_assert!(hw < a.len().abs_diff(b.len())),
        }
    }
}
