//! Progressive shortest encoding of compression plans.
//!
//! A plan compressing `k` layers is written as `[k, g1, ..., gk]`: the count
//! first, then one catalog group id per compressed layer in front-to-back
//! order. Layers are identified by position in a caller-supplied order, so the
//! string stays short and grows by one digit each time the search fixes a
//! further layer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub layer: usize,
    pub group_id: usize,
}

impl Assignment {
    pub fn new(layer: usize, group_id: usize) -> Self {
        Assignment { layer, group_id }
    }
}

/// Group assignments for compressed layers, indexed by backbone layer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompressionPlan {
    assignments: Vec<Assignment>,
}

impl CompressionPlan {
    pub fn empty() -> Self {
        CompressionPlan::default()
    }

    /// Layers must be strictly increasing and group ids non-zero.
    pub fn new(assignments: Vec<Assignment>) -> Result<Self> {
        for w in assignments.windows(2) {
            if w[1].layer <= w[0].layer {
                return Err(Error::InvalidValue(format!(
                    "plan layers must be strictly increasing, got {} then {}",
                    w[0].layer, w[1].layer
                )));
            }
        }
        if let Some(a) = assignments.iter().find(|a| a.group_id == 0) {
            return Err(Error::InvalidValue(format!(
                "plan assigns the identity group to layer {}",
                a.layer
            )));
        }
        Ok(CompressionPlan { assignments })
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        CompressionPlan::new(pairs.iter().map(|&(l, g)| Assignment::new(l, g)).collect())
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn layers(&self) -> Vec<usize> {
        self.assignments.iter().map(|a| a.layer).collect()
    }

    pub fn group_at(&self, layer: usize) -> Option<usize> {
        self.assignments.iter().find(|a| a.layer == layer).map(|a| a.group_id)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|a| (a.layer, a.group_id))
    }

    /// A copy with one more assignment appended. Identity (`group_id == 0`)
    /// leaves the plan unchanged.
    pub fn extended(&self, layer: usize, group_id: usize) -> Result<Self> {
        if group_id == 0 {
            return Ok(self.clone());
        }
        if let Some(last) = self.assignments.last() {
            if layer <= last.layer {
                return Err(Error::InvalidValue(format!(
                    "cannot extend a plan ending at layer {} with layer {layer}",
                    last.layer
                )));
            }
        }
        let mut assignments = self.assignments.clone();
        assignments.push(Assignment::new(layer, group_id));
        Ok(CompressionPlan { assignments })
    }

    /// Same plan with the group at `layer` replaced.
    pub fn with_group(&self, layer: usize, group_id: usize) -> Result<Self> {
        let mut assignments = self.assignments.clone();
        match assignments.iter().position(|a| a.layer == layer) {
            Some(i) if group_id == 0 => {
                assignments.remove(i);
            }
            Some(i) => assignments[i].group_id = group_id,
            None => return Err(Error::InvalidValue(format!("layer {layer} is not in the plan"))),
        }
        Ok(CompressionPlan { assignments })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlanEncoding {
    digits: Vec<usize>,
}

impl PlanEncoding {
    pub fn new(digits: Vec<usize>) -> Result<Self> {
        let Some(&k) = digits.first() else {
            return Err(Error::MalformedEncoding("empty digit sequence".into()));
        };
        if digits.len() != k + 1 {
            return Err(Error::MalformedEncoding(format!(
                "leading digit says {k} layers but {} group digits follow",
                digits.len() - 1
            )));
        }
        Ok(PlanEncoding { digits })
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    pub fn compressed_count(&self) -> usize {
        self.digits[0]
    }

    pub fn groups(&self) -> &[usize] {
        &self.digits[1..]
    }
}

impl fmt::Display for PlanEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.digits.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for PlanEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::MalformedEncoding(format!("bad digit {p:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        PlanEncoding::new(digits)
    }
}

impl Serialize for PlanEncoding {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PlanEncoding {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn encode(plan: &CompressionPlan) -> PlanEncoding {
    let mut digits = Vec::with_capacity(plan.len() + 1);
    digits.push(plan.len());
    digits.extend(plan.assignments.iter().map(|a| a.group_id));
    PlanEncoding { digits }
}

/// Inverse of [`encode`]. `order` lists candidate layers front to back; the
/// first `k` of them receive the `k` group digits. `catalog_size` is the
/// number of non-identity groups, so valid digits are `1..=catalog_size`.
pub fn decode(encoding: &PlanEncoding, order: &[usize], catalog_size: usize) -> Result<CompressionPlan> {
    let k = encoding.compressed_count();
    if order.len() < k {
        return Err(Error::MalformedEncoding(format!(
            "{k} compressed layers but only {} layers in the order",
            order.len()
        )));
    }
    let mut assignments = Vec::with_capacity(k);
    for (&layer, &g) in order.iter().zip(encoding.groups()) {
        if g == 0 || g > catalog_size {
            return Err(Error::MalformedEncoding(format!(
                "unknown group id {g} (catalog has ids 1..={catalog_size})"
            )));
        }
        assignments.push(Assignment::new(layer, g));
    }
    CompressionPlan::new(assignments).map_err(|e| Error::MalformedEncoding(e.to_string()))
}

/// Bits needed by the fixed-width binary scheme: one on/off bit per layer plus
/// a one-hot M-bit operator field per layer.
pub fn classic_binary_length(n: u64, m: u64) -> u64 {
    (m + 1) * n
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SearchSpaceSizes {
    /// `2^N * M^N` encodings of the fixed-width scheme (saturating).
    pub classic: u128,
    /// Concrete per-run evaluation cap of the progressive search: 6 per layer.
    pub progressive_bound: u64,
}

pub fn search_space_sizes(n: u32, m: u64) -> SearchSpaceSizes {
    let classic = 2u128
        .checked_pow(n)
        .and_then(|a| (m as u128).checked_pow(n).and_then(|b| a.checked_mul(b)))
        .unwrap_or(u128::MAX);
    SearchSpaceSizes {
        classic,
        progressive_bound: 6 * n as u64,
    }
}

/// Distinct plans over `n` layers with `m` non-identity groups: `(m+1)^n`.
pub fn distinct_plan_count(n: u32, m: u64) -> u128 {
    (m as u128 + 1).checked_pow(n).unwrap_or(u128::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(pairs: &[(usize, usize)]) -> CompressionPlan {
        CompressionPlan::from_pairs(pairs).unwrap()
    }

    #[test]
    fn walkthrough_fixtures() {
        assert_eq!(encode(&plan(&[(1, 1)])).digits(), &[1, 1]);
        assert_eq!(encode(&CompressionPlan::empty()).digits(), &[0]);
        assert_eq!(encode(&plan(&[(1, 1), (2, 3)])).digits(), &[2, 1, 3]);

        let enc = PlanEncoding::new(vec![1, 1]).unwrap();
        assert_eq!(decode(&enc, &[1, 2, 3], 4).unwrap(), plan(&[(1, 1)]));
        let enc = PlanEncoding::new(vec![0]).unwrap();
        assert!(decode(&enc, &[1, 2, 3], 4).unwrap().is_empty());
    }

    #[test]
    fn malformed_encodings() {
        assert!(matches!(PlanEncoding::new(vec![2, 1]), Err(Error::MalformedEncoding(_))));
        assert!(matches!(PlanEncoding::new(vec![]), Err(Error::MalformedEncoding(_))));
        assert!("2,1".parse::<PlanEncoding>().is_err());
        assert!("1,x".parse::<PlanEncoding>().is_err());

        let enc = PlanEncoding::new(vec![1, 5]).unwrap();
        assert!(matches!(decode(&enc, &[1, 2], 4), Err(Error::MalformedEncoding(_))));
        let enc = PlanEncoding::new(vec![1, 0]).unwrap();
        assert!(decode(&enc, &[1, 2], 4).is_err());
        let enc = PlanEncoding::new(vec![3, 1, 1, 1]).unwrap();
        assert!(decode(&enc, &[1, 2], 4).is_err());
    }

    #[test]
    fn string_form() {
        let enc: PlanEncoding = "2,1,3".parse().unwrap();
        assert_eq!(enc.to_string(), "2,1,3");
        assert_eq!(serde_json::to_string(&enc).unwrap(), "\"2,1,3\"");
        let back: PlanEncoding = serde_json::from_str("\"0\"").unwrap();
        assert_eq!(back.compressed_count(), 0);
    }

    #[test]
    fn space_sizes() {
        assert_eq!(classic_binary_length(3, 4), 15);
        assert_eq!(classic_binary_length(1, 1), 2);
        assert_eq!(classic_binary_length(5, 9), 50);
        assert_eq!(search_space_sizes(3, 4).classic, 512);
        assert_eq!(search_space_sizes(1, 1).classic, 2);
        assert_eq!(search_space_sizes(5, 9).classic, 1_889_568);
        assert_eq!(search_space_sizes(5, 9).progressive_bound, 30);
        assert_eq!(distinct_plan_count(1, 2), 3);
        assert_eq!(distinct_plan_count(3, 4), 125);
        assert_eq!(search_space_sizes(200, 9).classic, u128::MAX);
    }

    #[test]
    fn plan_invariants() {
        assert!(CompressionPlan::from_pairs(&[(2, 1), (1, 1)]).is_err());
        assert!(CompressionPlan::from_pairs(&[(1, 1), (1, 2)]).is_err());
        assert!(CompressionPlan::from_pairs(&[(1, 0)]).is_err());
        let p = plan(&[(1, 2)]);
        assert_eq!(p.extended(3, 0).unwrap(), p);
        assert!(p.extended(1, 1).is_err());
        assert_eq!(p.with_group(1, 4).unwrap(), plan(&[(1, 4)]));
        assert!(p.with_group(1, 0).unwrap().is_empty());
    }

    #[test]
    fn prefix_extension_increments_count() {
        let p = plan(&[(1, 2), (3, 1)]);
        let old = encode(&p);
        let new = encode(&p.extended(4, 3).unwrap());
        let mut expect = old.digits().to_vec();
        expect[0] += 1;
        expect.push(3);
        assert_eq!(new.digits(), expect.as_slice());
    }
}
