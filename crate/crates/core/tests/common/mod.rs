//! Helpers shared by the integration tests.
#![allow(dead_code)]

use ctlab::ct::{run_all, DEFAULT_FUEL};
use ctlab::semantics::Semantics;
use ctlab::{InputSpec, Program};

/// Walks two states in step while they sit at the same program point.
/// Each pair of equal-point states is one sample: both must step
/// deterministically, and equal observations must lead to equal points.
/// Returns the number of samples or the first violation.
pub fn revelation_samples<S: Semantics>(sem: &S, mut a: S::State, mut b: S::State, fuel: usize) -> Result<usize, String> {
    let mut samples = 0;
    for _ in 0..fuel {
        if sem.is_final(&a) || sem.is_final(&b) || sem.point(&a) != sem.point(&b) {
            break;
        }
        let (oa, na) = sem.step(&a).map_err(|e| e.to_string())?;
        let (oa2, na2) = sem.step(&a).map_err(|e| e.to_string())?;
        if oa != oa2 || sem.point(&na) != sem.point(&na2) || sem.regs(&na) != sem.regs(&na2) || sem.mem(&na) != sem.mem(&na2) {
            return Err(format!("nondeterministic step at {:?}", sem.point(&a)));
        }
        let (ob, nb) = sem.step(&b).map_err(|e| e.to_string())?;
        samples += 1;
        if oa == ob && sem.point(&na) != sem.point(&nb) {
            return Err(format!(
                "equal observation {oa} from {:?} led to {:?} and {:?}",
                sem.point(&a),
                sem.point(&na),
                sem.point(&nb)
            ));
        }
        if oa != ob {
            break;
        }
        a = na;
        b = nb;
    }
    Ok(samples)
}

/// Constant-time by brute force over ordered pairs of related inputs,
/// assuming every run terminates.
pub fn naive_ct(prog: &Program, spec: &InputSpec) -> bool {
    let runs = run_all(prog, spec, DEFAULT_FUEL).unwrap();
    assert!(runs.iter().all(|(_, e)| e.terminated));
    runs.iter().all(|(i, a)| {
        runs.iter()
            .all(|(j, b)| !spec.related(i, j) || a.trace == b.trace)
    })
}
