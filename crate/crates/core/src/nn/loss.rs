//! Multi-head cross-entropy over compound-token attributes.

use std::rc::Rc;

use super::tape::{Id, Tape};
use super::{NnError, Real};

/// One attribute head: logits, targets, and a per-position selection mask
/// (false = the attribute does not apply at that position and is ignored).
pub struct CeHead {
    pub logits: Id,
    pub targets: Rc<Vec<usize>>,
    pub select: Rc<Vec<bool>>,
}

/// Mean of the per-attribute cross-entropies.
pub fn multihead_ce_loss<T: Real>(tape: &mut Tape<T>, heads: &[CeHead]) -> Result<Id, NnError> {
    if heads.is_empty() {
        return Err(NnError::Shape("multihead_ce_loss needs at least one head".into()));
    }
    let mut total: Option<Id> = None;
    for head in heads {
        let ce = tape.cross_entropy(head.logits, Rc::clone(&head.targets), Rc::clone(&head.select))?;
        total = Some(match total {
            None => ce,
            Some(acc) => tape.add(acc, ce),
        });
    }
    let total = total.expect("nonempty heads");
    Ok(tape.scale(total, T::from(1.0 / heads.len() as f64).unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_logits_give_near_zero_loss() {
        let mut tape: Tape<f64> = Tape::new();
        let mut data = vec![0.0; 3 * 4];
        for (r, &t) in [1usize, 0, 3].iter().enumerate() {
            data[r * 4 + t] = 50.0;
        }
        let logits = tape.leaf(3, 4, data);
        let heads = vec![CeHead {
            logits,
            targets: Rc::new(vec![1, 0, 3]),
            select: Rc::new(vec![true; 3]),
        }];
        let loss = multihead_ce_loss(&mut tape, &heads).unwrap();
        assert!(tape.scalar(loss) < 1e-9);
    }

    #[test]
    fn uniform_logits_give_ln_v_per_attribute() {
        let mut tape: Tape<f64> = Tape::new();
        let v1 = 5usize;
        let v2 = 9usize;
        let l1 = tape.leaf(2, v1, vec![0.0; 2 * v1]);
        let l2 = tape.leaf(2, v2, vec![0.0; 2 * v2]);
        let heads = vec![
            CeHead { logits: l1, targets: Rc::new(vec![0, 1]), select: Rc::new(vec![true; 2]) },
            CeHead { logits: l2, targets: Rc::new(vec![2, 3]), select: Rc::new(vec![true; 2]) },
        ];
        let loss = multihead_ce_loss(&mut tape, &heads).unwrap();
        let expect = ((v1 as f64).ln() + (v2 as f64).ln()) / 2.0;
        assert!((tape.scalar(loss) - expect).abs() < 1e-12);
    }

    /// Independent scalar re-implementation on random logits.
    #[test]
    fn matches_a_scalar_oracle_on_random_inputs() {
        use rand::Rng;
        let mut rng = crate::toy::rng(21);
        for _ in 0..20 {
            let rows = rng.random_range(1..6usize);
            let mut tape: Tape<f64> = Tape::new();
            let mut heads = Vec::new();
            let mut oracle_heads = Vec::new();
            for _ in 0..rng.random_range(1..4usize) {
                let v = rng.random_range(2..7usize);
                let data: Vec<f64> = (0..rows * v).map(|_| rng.random_range(-3.0..3.0)).collect();
                let targets: Vec<usize> = (0..rows).map(|_| rng.random_range(0..v)).collect();
                let select: Vec<bool> = (0..rows).map(|_| rng.random_bool(0.8)).collect();
                let logits = tape.leaf(rows, v, data.clone());
                heads.push(CeHead {
                    logits,
                    targets: Rc::new(targets.clone()),
                    select: Rc::new(select.clone()),
                });
                oracle_heads.push((data, v, targets, select));
            }
            let loss = multihead_ce_loss(&mut tape, &heads).unwrap();

            let mut expect = 0.0;
            for (data, v, targets, select) in &oracle_heads {
                let mut head_loss = 0.0;
                let mut count = 0usize;
                for r in 0..rows {
                    if !select[r] {
                        continue;
                    }
                    let row = &data[r * v..(r + 1) * v];
                    let denom: f64 = row.iter().map(|x| x.exp()).sum();
                    head_loss -= (row[targets[r]].exp() / denom).ln();
                    count += 1;
                }
                if count > 0 {
                    expect += head_loss / count as f64;
                }
            }
            expect /= oracle_heads.len() as f64;
            assert!((tape.scalar(loss) - expect).abs() < 1e-6);
        }
    }
}
