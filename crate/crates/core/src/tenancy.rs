//! Multi-tenancy: the MNO -> MVNO -> RAN-slice hierarchy, UE attachment and
//! radio resource (PRB) scheduling.
//!
//! Shares are exact rationals, so guarantee and work-conservation checks
//! hold with zero tolerance. The allocator gives every slice its guaranteed
//! floor, redistributes unused capacity by weighted water-filling over the
//! shares of still-unsatisfied slices, and hands out the last single PRBs
//! in ascending lexicographic slice-id order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::grammar::{self, Scalar, Value};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TenancyError {
    #[error("`{0}` already exists")]
    Duplicate(String),
    #[error("parent `{0}` not found")]
    UnknownParent(String),
    #[error("invalid share: {0}")]
    InvalidShare(String),
    #[error("share quota exhausted; available {available}")]
    ShareExhausted { available: String },
    #[error("slice `{0}` is not registered")]
    UnknownSlice(String),
    #[error("slice id `{0}` is ambiguous across mvnos; qualify as mvno/slice")]
    AmbiguousSlice(String),
    #[error("tenant path `{0}` not found")]
    UnknownPath(String),
    #[error("slice `{0}` has no running instance to serve traffic")]
    SliceNotServing(String),
    #[error("ue `{0}` is already attached")]
    AlreadyAttached(String),
    #[error("ue `{0}` is not attached")]
    UnknownUe(String),
    #[error("instance `{0}` is not in Running state")]
    InstanceNotRunning(String),
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// An exact rational in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    num: u64,
    den: u64,
}

impl Share {
    pub const ONE: Share = Share { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Share, TenancyError> {
        if den == 0 {
            return Err(TenancyError::InvalidShare("denominator is zero".into()));
        }
        if num == 0 {
            return Err(TenancyError::InvalidShare("share must be positive".into()));
        }
        if num > den {
            return Err(TenancyError::InvalidShare(format!("{num}/{den} exceeds 1")));
        }
        let g = gcd(num, den);
        Ok(Share {
            num: num / g,
            den: den / g,
        })
    }

    /// Accepts decimals (`0.6`, `1`) and fractions (`3/5`).
    pub fn parse(text: &str) -> Result<Share, TenancyError> {
        if let Some((n, d)) = text.split_once('/') {
            let num = n
                .parse()
                .map_err(|_| TenancyError::InvalidShare(format!("`{text}` is not a share")))?;
            let den = d
                .parse()
                .map_err(|_| TenancyError::InvalidShare(format!("`{text}` is not a share")))?;
            return Share::new(num, den);
        }
        match text.split_once('.') {
            None => {
                let whole: u64 = text
                    .parse()
                    .map_err(|_| TenancyError::InvalidShare(format!("`{text}` is not a share")))?;
                Share::new(whole, 1)
            }
            Some((whole, frac)) => {
                if frac.is_empty() || frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
                    return Err(TenancyError::InvalidShare(format!("`{text}` is not a share")));
                }
                let whole: u64 = if whole.is_empty() {
                    0
                } else {
                    whole
                        .parse()
                        .map_err(|_| TenancyError::InvalidShare(format!("`{text}` is not a share")))?
                };
                let den = 10u64.pow(frac.len() as u32);
                let frac: u64 = frac.parse().expect("digits");
                Share::new(whole * den + frac, den)
            }
        }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    /// Product of two shares; stays within (0, 1].
    pub fn mul(&self, other: &Share) -> Share {
        let num = self.num as u128 * other.num as u128;
        let den = self.den as u128 * other.den as u128;
        let g = gcd_u128(num, den);
        Share {
            num: (num / g) as u64,
            den: (den / g) as u64,
        }
    }
}

fn gcd_u128(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd_u128(b, a % b)
    }
}

/// Exact decimal rendering when the denominator divides a power of ten,
/// `num/den` otherwise.
pub fn format_ratio(num: u64, den: u64) -> String {
    if num == 0 {
        return "0".to_string();
    }
    let g = gcd(num, den);
    let (num, den) = (num / g, den / g);
    if den == 1 {
        return num.to_string();
    }
    let mut rem = num % den;
    let mut digits = String::new();
    for _ in 0..18 {
        rem *= 10;
        digits.push(char::from_digit((rem / den) as u32, 10).expect("digit"));
        rem %= den;
        if rem == 0 {
            return format!("{}.{digits}", num / den);
        }
    }
    format!("{num}/{den}")
}

impl std::fmt::Display for Share {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&format_ratio(self.num, self.den))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellConfig {
    pub total_prbs: u64,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig { total_prbs: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RanSlice {
    pub slice_id: String,
    pub guaranteed_share: Share,
    pub attached_instance: Option<String>,
    pub ues: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mvno {
    pub mvno_id: String,
    /// Fraction of the MNO's cell this MVNO owns. Defaults to 1; shares act
    /// as relative weights after normalization, so equal quotas are neutral.
    pub quota: Share,
    pub ran_slices: Vec<RanSlice>,
}

impl Mvno {
    fn share_sum(&self) -> (u64, u64) {
        // Sum of guaranteed shares as an exact fraction.
        let mut num: u128 = 0;
        let mut den: u128 = 1;
        for slice in &self.ran_slices {
            num = num * slice.guaranteed_share.den as u128 + slice.guaranteed_share.num as u128 * den;
            den *= slice.guaranteed_share.den as u128;
            let g = gcd_u128(num.max(1), den);
            num /= g;
            den /= g;
        }
        (num as u64, den as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mno {
    pub plmn_id: String,
    pub mvnos: Vec<Mvno>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeAttachment {
    pub plmn_id: String,
    pub mvno_id: String,
    pub slice_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantTree {
    mnos: Vec<Mno>,
    ues: BTreeMap<String, UeAttachment>,
}

impl TenantTree {
    pub fn new() -> TenantTree {
        TenantTree::default()
    }

    pub fn mnos(&self) -> &[Mno] {
        &self.mnos
    }

    pub fn ues(&self) -> &BTreeMap<String, UeAttachment> {
        &self.ues
    }

    pub fn create_mno(&mut self, plmn_id: &str) -> Result<(), TenancyError> {
        if self.mnos.iter().any(|m| m.plmn_id == plmn_id) {
            return Err(TenancyError::Duplicate(format!("mno `{plmn_id}`")));
        }
        self.mnos.push(Mno {
            plmn_id: plmn_id.to_string(),
            mvnos: Vec::new(),
        });
        Ok(())
    }

    fn mno_mut(&mut self, plmn_id: &str) -> Result<&mut Mno, TenancyError> {
        self.mnos
            .iter_mut()
            .find(|m| m.plmn_id == plmn_id)
            .ok_or_else(|| TenancyError::UnknownParent(format!("mno `{plmn_id}`")))
    }

    pub fn mno(&self, plmn_id: &str) -> Option<&Mno> {
        self.mnos.iter().find(|m| m.plmn_id == plmn_id)
    }

    pub fn create_mvno(&mut self, plmn_id: &str, mvno_id: &str, quota: Share) -> Result<(), TenancyError> {
        let mno = self.mno_mut(plmn_id)?;
        if mno.mvnos.iter().any(|m| m.mvno_id == mvno_id) {
            return Err(TenancyError::Duplicate(format!("mvno `{mvno_id}`")));
        }
        mno.mvnos.push(Mvno {
            mvno_id: mvno_id.to_string(),
            quota,
            ran_slices: Vec::new(),
        });
        Ok(())
    }

    fn mvno_mut(&mut self, plmn_id: &str, mvno_id: &str) -> Result<&mut Mvno, TenancyError> {
        let mno = self.mno_mut(plmn_id)?;
        mno.mvnos
            .iter_mut()
            .find(|m| m.mvno_id == mvno_id)
            .ok_or_else(|| TenancyError::UnknownParent(format!("mvno `{mvno_id}`")))
    }

    pub fn create_ran_slice(
        &mut self,
        plmn_id: &str,
        mvno_id: &str,
        slice_id: &str,
        share: Share,
    ) -> Result<(), TenancyError> {
        let mvno = self.mvno_mut(plmn_id, mvno_id)?;
        if mvno.ran_slices.iter().any(|s| s.slice_id == slice_id) {
            return Err(TenancyError::Duplicate(format!("slice `{slice_id}`")));
        }
        // Existing shares plus the new one must stay within the MVNO quota of 1.
        let (sum_num, sum_den) = mvno.share_sum();
        let lhs = sum_num as u128 * share.den as u128 + share.num as u128 * sum_den as u128;
        let rhs = sum_den as u128 * share.den as u128;
        if lhs > rhs {
            // available = 1 - sum of existing shares
            let available = if sum_num >= sum_den {
                "0".to_string()
            } else {
                format_ratio(sum_den - sum_num, sum_den)
            };
            return Err(TenancyError::ShareExhausted { available });
        }
        mvno.ran_slices.push(RanSlice {
            slice_id: slice_id.to_string(),
            guaranteed_share: share,
            attached_instance: None,
            ues: BTreeSet::new(),
        });
        Ok(())
    }

    fn slice_mut(&mut self, plmn_id: &str, mvno_id: &str, slice_id: &str) -> Result<&mut RanSlice, TenancyError> {
        let path = format!("{plmn_id}/{mvno_id}/{slice_id}");
        let mno = self
            .mnos
            .iter_mut()
            .find(|m| m.plmn_id == plmn_id)
            .ok_or_else(|| TenancyError::UnknownPath(path.clone()))?;
        let mvno = mno
            .mvnos
            .iter_mut()
            .find(|m| m.mvno_id == mvno_id)
            .ok_or_else(|| TenancyError::UnknownPath(path.clone()))?;
        mvno.ran_slices
            .iter_mut()
            .find(|s| s.slice_id == slice_id)
            .ok_or(TenancyError::UnknownPath(path))
    }

    pub fn slice(&self, plmn_id: &str, mvno_id: &str, slice_id: &str) -> Option<&RanSlice> {
        self.mno(plmn_id)?
            .mvnos
            .iter()
            .find(|m| m.mvno_id == mvno_id)?
            .ran_slices
            .iter()
            .find(|s| s.slice_id == slice_id)
    }

    /// Binds an orchestrated slice instance to a RAN slice. `running` is the
    /// instance's current lifecycle status as resolved by the caller.
    pub fn bind_instance(
        &mut self,
        plmn_id: &str,
        mvno_id: &str,
        slice_id: &str,
        instance_id: &str,
        running: bool,
    ) -> Result<(), TenancyError> {
        let slice = self.slice_mut(plmn_id, mvno_id, slice_id)?;
        if !running {
            return Err(TenancyError::InstanceNotRunning(instance_id.to_string()));
        }
        slice.attached_instance = Some(instance_id.to_string());
        Ok(())
    }

    pub fn unbind_instance(&mut self, instance_id: &str) {
        for mno in &mut self.mnos {
            for mvno in &mut mno.mvnos {
                for slice in &mut mvno.ran_slices {
                    if slice.attached_instance.as_deref() == Some(instance_id) {
                        slice.attached_instance = None;
                    }
                }
            }
        }
    }

    /// True when any RAN slice currently references the instance.
    pub fn instance_bound(&self, instance_id: &str) -> bool {
        self.mnos.iter().any(|mno| {
            mno.mvnos.iter().any(|mvno| {
                mvno.ran_slices
                    .iter()
                    .any(|s| s.attached_instance.as_deref() == Some(instance_id))
            })
        })
    }

    /// Attaches a UE to a slice. `instance_running` resolves whether a bound
    /// instance id is currently Running; the tree itself does not track
    /// lifecycle state.
    pub fn attach_ue(
        &mut self,
        ue_id: &str,
        plmn_id: &str,
        mvno_id: &str,
        slice_id: &str,
        instance_running: impl Fn(&str) -> bool,
    ) -> Result<(), TenancyError> {
        if self.ues.contains_key(ue_id) {
            return Err(TenancyError::AlreadyAttached(ue_id.to_string()));
        }
        let slice = self.slice_mut(plmn_id, mvno_id, slice_id)?;
        match &slice.attached_instance {
            Some(instance) if instance_running(instance) => {}
            _ => return Err(TenancyError::SliceNotServing(slice_id.to_string())),
        }
        slice.ues.insert(ue_id.to_string());
        self.ues.insert(
            ue_id.to_string(),
            UeAttachment {
                plmn_id: plmn_id.to_string(),
                mvno_id: mvno_id.to_string(),
                slice_id: slice_id.to_string(),
            },
        );
        Ok(())
    }

    pub fn detach_ue(&mut self, ue_id: &str) -> Result<(), TenancyError> {
        let attachment = self
            .ues
            .remove(ue_id)
            .ok_or_else(|| TenancyError::UnknownUe(ue_id.to_string()))?;
        if let Ok(slice) = self.slice_mut(&attachment.plmn_id, &attachment.mvno_id, &attachment.slice_id) {
            slice.ues.remove(ue_id);
        }
        Ok(())
    }

    /// Allocates PRBs among the demanded slices of one MNO. Demands are keyed
    /// by slice id; the effective weight of a slice is its guaranteed share
    /// scaled by its MVNO's quota.
    pub fn allocate_prbs(
        &self,
        plmn_id: &str,
        cell: &CellConfig,
        demands: &BTreeMap<String, u64>,
    ) -> Result<BTreeMap<String, u64>, TenancyError> {
        let mno = self
            .mno(plmn_id)
            .ok_or_else(|| TenancyError::UnknownParent(format!("mno `{plmn_id}`")))?;
        let mut requests = Vec::new();
        for (slice_id, demand) in demands {
            let mut found: Option<PrbRequest> = None;
            for mvno in &mno.mvnos {
                if let Some(slice) = mvno.ran_slices.iter().find(|s| &s.slice_id == slice_id) {
                    if found.is_some() {
                        return Err(TenancyError::AmbiguousSlice(slice_id.clone()));
                    }
                    found = Some(PrbRequest {
                        slice_id: slice_id.clone(),
                        share: mvno.quota.mul(&slice.guaranteed_share),
                        demand: *demand,
                    });
                }
            }
            requests.push(found.ok_or_else(|| TenancyError::UnknownSlice(slice_id.clone()))?);
        }
        Ok(water_fill(cell.total_prbs, &requests))
    }

    /// Tenant tree as a descriptor-grammar document, for fixtures and goldens.
    pub fn export_document(&self) -> String {
        let scalar = |s: &str| Value::Scalar(Scalar::Str(s.to_string()));
        let mnos = self
            .mnos
            .iter()
            .map(|mno| {
                let mvnos = mno
                    .mvnos
                    .iter()
                    .map(|mvno| {
                        let mut fields = vec![
                            ("id".to_string(), scalar(&mvno.mvno_id)),
                            ("quota".to_string(), scalar(&mvno.quota.to_string())),
                        ];
                        if !mvno.ran_slices.is_empty() {
                            fields.push((
                                "slices".to_string(),
                                Value::List(
                                    mvno.ran_slices
                                        .iter()
                                        .map(|s| {
                                            let mut f = vec![
                                                ("id".to_string(), scalar(&s.slice_id)),
                                                ("share".to_string(), scalar(&s.guaranteed_share.to_string())),
                                            ];
                                            if let Some(instance) = &s.attached_instance {
                                                f.push(("instance".to_string(), scalar(instance)));
                                            }
                                            if !s.ues.is_empty() {
                                                f.push((
                                                    "ues".to_string(),
                                                    Value::List(s.ues.iter().map(|u| scalar(u)).collect()),
                                                ));
                                            }
                                            Value::Map(f)
                                        })
                                        .collect(),
                                ),
                            ));
                        }
                        Value::Map(fields)
                    })
                    .collect();
                Value::Map(vec![
                    ("plmn".to_string(), scalar(&mno.plmn_id)),
                    ("mvnos".to_string(), Value::List(mvnos)),
                ])
            })
            .collect();
        let doc = Value::Map(vec![
            ("kind".to_string(), scalar("tenants")),
            ("mnos".to_string(), Value::List(mnos)),
        ]);
        grammar::serialize_document(&doc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrbRequest {
    pub slice_id: String,
    pub share: Share,
    pub demand: u64,
}

/// Integer PRB allocation. Shares act as relative weights (normalized over
/// the demanded set), every slice is guaranteed `min(demand,
/// floor(weight * total))`, spare capacity water-fills to unsatisfied slices
/// by share weight, and final single PRBs go out in ascending lexicographic
/// slice-id order. With shares summing to <= 1 the normalized weight of a
/// slice is at least its raw share, so the raw-share guarantee holds too.
pub fn water_fill(total_prbs: u64, requests: &[PrbRequest]) -> BTreeMap<String, u64> {
    let mut sorted: Vec<&PrbRequest> = requests.iter().collect();
    sorted.sort_by(|a, b| a.slice_id.cmp(&b.slice_id));
    if sorted.is_empty() {
        return BTreeMap::new();
    }

    // Bring all shares onto one denominator so weights are exact integers.
    let mut common_den: u128 = 1;
    for req in &sorted {
        let den = req.share.den as u128;
        common_den = common_den / gcd_u128(common_den, den) * den;
    }
    let weights: Vec<u128> = sorted
        .iter()
        .map(|req| req.share.num as u128 * (common_den / req.share.den as u128))
        .collect();
    let weight_sum: u128 = weights.iter().sum();
    let total = total_prbs as u128;

    // Guaranteed floor, demand-capped.
    let mut grants: Vec<u128> = sorted
        .iter()
        .zip(&weights)
        .map(|(req, w)| (req.demand as u128).min(w * total / weight_sum))
        .collect();

    loop {
        let granted: u128 = grants.iter().sum();
        let leftover = total - granted;
        let unsatisfied: Vec<usize> = (0..sorted.len())
            .filter(|&i| grants[i] < sorted[i].demand as u128)
            .collect();
        if leftover == 0 || unsatisfied.is_empty() {
            break;
        }
        let pool_weight: u128 = unsatisfied.iter().map(|&i| weights[i]).sum();
        let mut distributed = false;
        for &i in &unsatisfied {
            let gap = sorted[i].demand as u128 - grants[i];
            let extra = gap.min(weights[i] * leftover / pool_weight);
            if extra > 0 {
                grants[i] += extra;
                distributed = true;
            }
        }
        if !distributed {
            // All weighted floors rounded to zero, so fewer PRBs remain than
            // unsatisfied slices; hand them out one by one in lex id order
            // (the slice list is already sorted).
            let mut remaining = leftover;
            for &i in &unsatisfied {
                if remaining == 0 {
                    break;
                }
                grants[i] += 1;
                remaining -= 1;
            }
        }
    }

    sorted
        .iter()
        .zip(&grants)
        .map(|(req, grant)| (req.slice_id.clone(), *grant as u64))
        .collect()
}
