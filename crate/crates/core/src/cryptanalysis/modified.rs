//! Key recovery when every zero bit gets its own random fake template.
//!
//! All genuine biocodes leak the same word parities, while each fake leaks
//! independent coin flips. Within a group of aligned biocodes the genuine
//! ones therefore sit in the larger parity class, and the smaller class can
//! be labeled fake. Eliminations repeat word by word on the survivors. What
//! remains is settled by scoring survivors against a per-slot parity vote
//! and finally by exhaustive search, all checked against the key digest.

use std::collections::HashMap;
use std::time::Instant;

use itertools::Itertools;

use super::RecoveryReport;
use crate::bitcore::BitString;
use crate::error::{Error, Result};
use crate::vault::{Key, PublicVault};

/// Outcome of the word-by-word minority elimination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Elimination {
    /// `alive[i]` is false once slot `i` has been labeled fake.
    pub alive: Vec<bool>,
    /// Slots labeled fake at each depth; entry 0 is word 1.
    pub per_depth: Vec<usize>,
    /// Groups examined across all depths.
    pub groups: usize,
}

impl Elimination {
    pub fn survivors(&self) -> Vec<usize> {
        (0..self.alive.len()).filter(|&i| self.alive[i]).collect()
    }

    /// Deepest word at which something was eliminated.
    pub fn max_depth(&self) -> usize {
        self.per_depth.iter().rposition(|&c| c > 0).map_or(0, |d| d + 1)
    }
}

/// Groups survivors by word-length prefix, one word deeper per round, and
/// drops the strictly smaller parity class of every group. Groups whose two
/// classes tie are left alone.
pub fn eliminate_minorities(view: &PublicVault<'_>) -> Elimination {
    let l = view.biocodes.len();
    let mut alive = vec![true; l];
    // group id of each slot at the previous depth
    let mut group_of = vec![0usize; l];
    let mut per_depth = Vec::new();
    let mut groups = 0;
    let max_words = view.biocodes.iter().map(|b| b.d2()).max().unwrap_or(0);

    for depth in 0..max_words {
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in 0..l {
            let lengths = view.biocodes[i].layout().lengths();
            if !alive[i] || lengths.len() <= depth {
                continue;
            }
            let next = ids.len();
            let id = *ids.entry((group_of[i], lengths[depth])).or_insert(next);
            if id == members.len() {
                members.push(Vec::new());
            }
            members[id].push(i);
            group_of[i] = id;
        }
        groups += members.len();
        let mut eliminated = 0;
        for group in &members {
            let (ones, zeros): (Vec<usize>, Vec<usize>) =
                group.iter().partition(|&&i| view.biocodes[i].leaked_parity(depth));
            let minority = match zeros.len().cmp(&ones.len()) {
                std::cmp::Ordering::Less => zeros,
                std::cmp::Ordering::Greater => ones,
                std::cmp::Ordering::Equal => continue,
            };
            for i in minority {
                alive[i] = false;
                eliminated += 1;
            }
        }
        per_depth.push(eliminated);
    }
    Elimination {
        alive,
        per_depth,
        groups,
    }
}

/// For each member of `set`, the number of its words whose leaked parity
/// loses a strict majority vote among the members of `set` sharing that
/// exact word slot (offset and length).
pub fn consensus_scores(view: &PublicVault<'_>, set: &[usize]) -> Vec<usize> {
    let mut votes: HashMap<(usize, usize), [u32; 2]> = HashMap::new();
    for &i in set {
        let bc = &view.biocodes[i];
        for (j, slot) in bc.layout().words().enumerate() {
            votes.entry(slot).or_default()[usize::from(bc.leaked_parity(j))] += 1;
        }
    }
    set.iter()
        .map(|&i| {
            let bc = &view.biocodes[i];
            bc.layout()
                .words()
                .enumerate()
                .filter(|&(j, slot)| {
                    let v = votes[&slot];
                    let mine = usize::from(bc.leaked_parity(j));
                    v[mine] < v[1 - mine]
                })
                .count()
        })
        .collect()
}

struct Search<'v, 'a> {
    view: &'v PublicVault<'a>,
    budget: u64,
    tested: u64,
}

impl Search<'_, '_> {
    /// Tests one candidate; `Err` once the budget is spent.
    fn test(&mut self, candidate: &BitString) -> Result<bool> {
        if self.tested >= self.budget {
            return Err(Error::BudgetExceeded { tested: self.tested });
        }
        self.tested += 1;
        Ok(self.view.matches(candidate))
    }

    fn key_of(&self, ones: &[usize]) -> BitString {
        let mut k = BitString::zeros(self.view.biocodes.len());
        for &i in ones {
            k.set(i, true);
        }
        k
    }

    /// Every member of `set` set to one, then for each score threshold the
    /// members scoring at or below it.
    fn sweep(&mut self, set: &[usize]) -> Result<Option<BitString>> {
        let scores = consensus_scores(self.view, set);
        let all = self.key_of(set);
        if self.test(&all)? {
            return Ok(Some(all));
        }
        let thresholds: Vec<usize> = scores.iter().copied().sorted().dedup().collect();
        for &t in thresholds.iter().take(thresholds.len().saturating_sub(1)) {
            let kept: Vec<usize> = set
                .iter()
                .zip(&scores)
                .filter(|&(_, &s)| s <= t)
                .map(|(&i, _)| i)
                .collect();
            let candidate = self.key_of(&kept);
            if self.test(&candidate)? {
                return Ok(Some(candidate));
            }
        }
        Ok(None)
    }

    /// Starting from `survivors` set to one, toggles every subset of slots,
    /// smallest subsets first. Survivors that lose the vote most often come
    /// first, then eliminated slots that lose it least often.
    fn exhaustive(&mut self, survivors: &[usize], everyone: &[usize]) -> Result<Option<BitString>> {
        let scores = consensus_scores(self.view, everyone);
        let alive: Vec<bool> = {
            let mut a = vec![false; everyone.len()];
            for &i in survivors {
                a[i] = true;
            }
            a
        };
        let order: Vec<usize> = everyone
            .iter()
            .copied()
            .sorted_by_key(|&i| {
                if alive[i] {
                    (0, usize::MAX - scores[i], i)
                } else {
                    (1, scores[i], i)
                }
            })
            .collect();
        let base = self.key_of(survivors);
        for size in 1..=order.len() {
            for flips in order.iter().combinations(size) {
                let mut candidate = base.clone();
                for &&i in &flips {
                    candidate.flip(i);
                }
                if self.test(&candidate)? {
                    return Ok(Some(candidate));
                }
            }
        }
        Ok(None)
    }
}

/// Recovers the key of a per-bit-fake vault, spending at most `budget`
/// digest evaluations.
///
/// Stages, in order:
/// 1. minority elimination, then survivors set to one, then a threshold
///    sweep over survivors' consensus scores;
/// 2. the same sweep over every slot, which undoes any wrong elimination;
/// 3. exhaustive toggling of slot subsets around the survivor key.
///
/// Stages 2 and 3 mark the report with `fallback_used`.
pub fn recover_key_modified(view: &PublicVault<'_>, budget: u64) -> Result<RecoveryReport> {
    let start = Instant::now();
    let elimination = eliminate_minorities(view);
    let survivors = elimination.survivors();
    let mut report = RecoveryReport {
        recovered_key: None,
        candidates_tested: 0,
        groups: elimination.groups,
        max_depth: elimination.max_depth(),
        fallback_used: false,
        elapsed: Default::default(),
        eliminated_per_depth: elimination.per_depth.clone(),
    };
    let mut search = Search {
        view,
        budget,
        tested: 0,
    };

    let everyone: Vec<usize> = (0..view.biocodes.len()).collect();
    let outcome = (|| -> Result<Option<BitString>> {
        if let Some(k) = search.sweep(&survivors)? {
            return Ok(Some(k));
        }
        report.fallback_used = true;
        if let Some(k) = search.sweep(&everyone)? {
            return Ok(Some(k));
        }
        search.exhaustive(&survivors, &everyone)
    })();
    report.candidates_tested = search.tested;
    report.elapsed = start.elapsed();
    match outcome? {
        Some(k) => {
            report.recovered_key = Some(Key::new(k)?);
            Ok(report)
        }
        None => Err(Error::NoCandidateMatched {
            tested: report.candidates_tested,
        }),
    }
}
