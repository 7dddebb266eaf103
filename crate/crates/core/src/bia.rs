//! Blind-interference-alignment outer precoder: transmission block
//! construction for (L, G), per-group block-sparse precoding matrices, and
//! machine verification of the decodability and alignment conditions.
//!
//! Slots, groups and reception modes are 0-based throughout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the transmission block length; (L-1)^G grows fast.
pub const DEFAULT_SLOT_CAP: usize = 1 << 20;

/// Exact ratio of alignment blocks allocated to each group: 1 / (L + G - 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentRatio {
    pub numer: u64,
    pub denom: u64,
}

impl AlignmentRatio {
    pub fn as_f64(&self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

/// Prelog fraction under the BIA outer precoder for L APs and G groups.
/// The plain-BIA benchmark uses the same formula with G = K.
pub fn alignment_ratio(l: usize, g: usize) -> AlignmentRatio {
    debug_assert!(l >= 2 && g >= 1);
    AlignmentRatio {
        numer: 1,
        denom: (l + g - 1) as u64,
    }
}

/// Per-group, per-slot reception-mode indices in 0..L.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSchedule {
    /// `modes[g][slot]` is group g's reception mode at that slot.
    pub modes: Vec<Vec<usize>>,
}

/// The BIA transmission block for (L, G).
#[derive(Debug, Clone)]
pub struct TransmissionBlock {
    pub num_aps: usize,
    pub num_groups: usize,
    pub num_slots: usize,
    pub subblock1_len: usize,
    pub subblock2_len: usize,
    /// `alignment_blocks[g][zeta]` lists the L slots of that block, ascending.
    pub alignment_blocks: Vec<Vec<Vec<usize>>>,
    pub mode_schedule: ModeSchedule,
}

/// Block-sparse precoder of one group: identity blocks at the (slot, zeta)
/// pairs where the slot belongs to alignment block zeta.
#[derive(Debug, Clone)]
pub struct PrecodingMatrix {
    pub group: usize,
    pub num_aps: usize,
    pub num_slots: usize,
    pub num_alignment_blocks: usize,
    /// Identity-block placements (slot, zeta), sorted by slot then zeta.
    pub placements: Vec<(usize, usize)>,
}

impl PrecodingMatrix {
    /// Dense realization of shape (L * num_slots) x (L * num_alignment_blocks).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let l = self.num_aps;
        let mut m = DMatrix::zeros(l * self.num_slots, l * self.num_alignment_blocks);
        for &(slot, zeta) in &self.placements {
            for i in 0..l {
                m[(slot * l + i, zeta * l + i)] = 1.0;
            }
        }
        m
    }
}

/// A located violation of one of the BIA conditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub group: usize,
    pub block: usize,
    pub slots: Vec<usize>,
    pub detail: String,
}

/// Outcome of a condition check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionReport {
    pub condition: &'static str,
    pub violations: Vec<Violation>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            write!(f, "{}: pass", self.condition)
        } else {
            writeln!(f, "{}: FAIL ({} violations)", self.condition, self.violations.len())?;
            for v in &self.violations {
                writeln!(
                    f,
                    "  group {} block {} slots {:?}: {}",
                    v.group, v.block, v.slots, v.detail
                )?;
            }
            Ok(())
        }
    }
}

fn checked_block_size(l: usize, g: usize) -> Option<(usize, usize)> {
    let base = l - 1;
    let sb1 = base.checked_pow(g as u32)?;
    let per_group = base.checked_pow(g as u32 - 1)?;
    let sb2 = g.checked_mul(per_group)?;
    sb1.checked_add(sb2)?;
    Some((sb1, sb2))
}

/// Build the supersymbol for L reception modes and G groups.
///
/// Sub-block 1 enumerates the Cartesian product of the G mode counters over
/// 0..L-1 (lexicographic, group 0 most significant); sub-block 2 appends one
/// completion slot per alignment block, groups in ascending order. Each
/// group's alignment block zeta collects the L-1 sub-block-1 slots whose
/// other-group counters equal the zeta-th tuple, plus the matching completion
/// slot, so the group's own mode takes all L distinct values while every
/// other group's mode stays constant.
pub fn build_block(l: usize, g: usize) -> Result<TransmissionBlock> {
    build_block_with_cap(l, g, DEFAULT_SLOT_CAP)
}

pub fn build_block_with_cap(l: usize, g: usize, slot_cap: usize) -> Result<TransmissionBlock> {
    if l < 2 {
        return Err(Error::UnsupportedBlock(l));
    }
    if g == 0 {
        return Err(Error::Config("BIA block needs at least one group".into()));
    }
    let (sb1, sb2) = checked_block_size(l, g)
        .filter(|(a, b)| a + b <= slot_cap)
        .ok_or(Error::BlockTooLarge { l, g, cap: slot_cap })?;
    let num_slots = sb1 + sb2;
    let base = l - 1;
    let per_group_blocks = base.pow(g as u32 - 1);

    let mut modes = vec![vec![0usize; num_slots]; g];
    let mut alignment_blocks = vec![vec![Vec::with_capacity(l); per_group_blocks]; g];

    // Lexicographic index of the other-group counter tuple, given the full
    // counter tuple with group `own` removed.
    let zeta_of = |counters: &[usize], own: usize| -> usize {
        counters
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != own)
            .fold(0, |acc, (_, &c)| acc * base + c)
    };

    // Sub-block 1.
    let mut counters = vec![0usize; g];
    for slot in 0..sb1 {
        for grp in 0..g {
            modes[grp][slot] = counters[grp];
            alignment_blocks[grp][zeta_of(&counters, grp)].push(slot);
        }
        for digit in (0..g).rev() {
            counters[digit] += 1;
            if counters[digit] < base {
                break;
            }
            counters[digit] = 0;
        }
    }

    // Sub-block 2: completion slots, ascending group index.
    let mut slot = sb1;
    for grp in 0..g {
        let mut others = vec![0usize; g.saturating_sub(1)];
        for zeta in 0..per_group_blocks {
            for target in 0..g {
                modes[target][slot] = if target == grp {
                    l - 1
                } else {
                    let pos = if target < grp { target } else { target - 1 };
                    others.get(pos).copied().unwrap_or(0)
                };
            }
            alignment_blocks[grp][zeta].push(slot);
            slot += 1;
            for digit in (0..others.len()).rev() {
                others[digit] += 1;
                if others[digit] < base {
                    break;
                }
                others[digit] = 0;
            }
            let _ = zeta;
        }
    }

    Ok(TransmissionBlock {
        num_aps: l,
        num_groups: g,
        num_slots,
        subblock1_len: sb1,
        subblock2_len: sb2,
        alignment_blocks,
        mode_schedule: ModeSchedule { modes },
    })
}

/// Extract group g's block-sparse precoding matrix.
pub fn precoding_matrix(block: &TransmissionBlock, g: usize) -> Result<PrecodingMatrix> {
    if g >= block.num_groups {
        return Err(Error::IndexOutOfRange {
            what: "group",
            index: g,
            len: block.num_groups,
        });
    }
    let mut placements = Vec::new();
    for (zeta, slots) in block.alignment_blocks[g].iter().enumerate() {
        for &slot in slots {
            placements.push((slot, zeta));
        }
    }
    placements.sort_unstable();
    Ok(PrecodingMatrix {
        group: g,
        num_aps: block.num_aps,
        num_slots: block.num_slots,
        num_alignment_blocks: block.alignment_blocks[g].len(),
        placements,
    })
}

/// Condition 1: within each alignment block, the owning group's modes span L
/// distinct values, so the stacked channel states form an L x L matrix.
pub fn verify_decodability(block: &TransmissionBlock) -> ConditionReport {
    let mut violations = Vec::new();
    for (g, blocks) in block.alignment_blocks.iter().enumerate() {
        for (zeta, slots) in blocks.iter().enumerate() {
            let mut seen = vec![false; block.num_aps];
            let mut distinct = true;
            for &s in slots {
                let m = block.mode_schedule.modes[g][s];
                if m >= block.num_aps || seen[m] {
                    distinct = false;
                    break;
                }
                seen[m] = true;
            }
            if slots.len() != block.num_aps || !distinct {
                violations.push(Violation {
                    group: g,
                    block: zeta,
                    slots: slots.clone(),
                    detail: format!(
                        "modes {:?} do not span {} distinct values",
                        slots.iter().map(|&s| block.mode_schedule.modes[g][s]).collect::<Vec<_>>(),
                        block.num_aps
                    ),
                });
            }
        }
    }
    ConditionReport {
        condition: "decodability",
        violations,
    }
}

/// Condition 2: over each alignment block of group g, every other group's
/// reception mode stays constant, so its interference stays aligned.
pub fn verify_alignment(block: &TransmissionBlock) -> ConditionReport {
    let mut violations = Vec::new();
    for (g, blocks) in block.alignment_blocks.iter().enumerate() {
        for (zeta, slots) in blocks.iter().enumerate() {
            for other in 0..block.num_groups {
                if other == g || slots.is_empty() {
                    continue;
                }
                let reference = block.mode_schedule.modes[other][slots[0]];
                if slots
                    .iter()
                    .any(|&s| block.mode_schedule.modes[other][s] != reference)
                {
                    violations.push(Violation {
                        group: g,
                        block: zeta,
                        slots: slots.clone(),
                        detail: format!("group {other} changes mode inside the block"),
                    });
                }
            }
        }
    }
    ConditionReport {
        condition: "alignment",
        violations,
    }
}

/// Write the slot schedule as CSV rows `slot,group,mode`.
pub fn schedule_csv(block: &TransmissionBlock) -> String {
    let mut out = String::from("slot,group,mode\n");
    for slot in 0..block.num_slots {
        for g in 0..block.num_groups {
            out.push_str(&format!("{slot},{g},{}\n", block.mode_schedule.modes[g][slot]));
        }
    }
    out
}
