//! The fixed 22-joint rig all clips share.

use crate::error::{Error, Result};
use std::sync::{Arc, OnceLock};

/// Joint names, bone edges and rest lengths. The edge graph is a tree rooted
/// at the hip (joint 0), listed parents-first so forward kinematics can walk
/// the list in order.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSpec {
    pub joint_names: Vec<&'static str>,
    /// (parent, child) joint indices.
    pub edges: Vec<(usize, usize)>,
    /// Rest length per edge, centimeters.
    pub rest_lengths: Vec<f64>,
}

impl SkeletonSpec {
    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| *n == name)
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.joint_count();
        if self.edges.len() != j - 1 || self.rest_lengths.len() != self.edges.len() {
            return Err(Error::invalid(format!(
                "SkeletonSpec: {} joints need {} edges with lengths, got {} edges / {} lengths",
                j,
                j - 1,
                self.edges.len(),
                self.rest_lengths.len()
            )));
        }
        let mut reached = vec![false; j];
        reached[0] = true; // root = hip
        for &(p, c) in &self.edges {
            if p >= j || c >= j || c == 0 || !reached[p] || reached[c] {
                return Err(Error::invalid(format!(
                    "SkeletonSpec: edge ({p},{c}) breaks the parents-first tree rooted at 0"
                )));
            }
            reached[c] = true;
        }
        if !reached.iter().all(|&r| r) {
            return Err(Error::invalid("SkeletonSpec: joints unreachable from the hip"));
        }
        if self.rest_lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid("SkeletonSpec: rest lengths must be positive"));
        }
        Ok(())
    }
}

/// The default humanoid rig (lengths in cm, torso-down ordering).
pub fn default_rig() -> Arc<SkeletonSpec> {
    static RIG: OnceLock<Arc<SkeletonSpec>> = OnceLock::new();
    RIG.get_or_init(|| {
        let spec = SkeletonSpec {
            joint_names: vec![
                "hip", "spine", "chest", "neck", "head", "head_top", // 0..5
                "l_shoulder", "l_elbow", "l_wrist", "l_hand", // 6..9
                "r_shoulder", "r_elbow", "r_wrist", "r_hand", // 10..13
                "l_hip", "l_knee", "l_ankle", "l_foot", // 14..17
                "r_hip", "r_knee", "r_ankle", "r_foot", // 18..21
            ],
            edges: vec![
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 4),
                (4, 5),
                (2, 6),
                (6, 7),
                (7, 8),
                (8, 9),
                (2, 10),
                (10, 11),
                (11, 12),
                (12, 13),
                (0, 14),
                (14, 15),
                (15, 16),
                (16, 17),
                (0, 18),
                (18, 19),
                (19, 20),
                (20, 21),
            ],
            rest_lengths: vec![
                12.0, 18.0, 14.0, 10.0, 12.0, // spine chain
                18.0, 28.0, 25.0, 9.0, // left arm
                18.0, 28.0, 25.0, 9.0, // right arm
                11.0, 42.0, 40.0, 15.0, // left leg
                11.0, 42.0, 40.0, 15.0, // right leg
            ],
        };
        spec.validate().expect("default rig is well-formed");
        Arc::new(spec)
    })
    .clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rig_is_a_22_joint_tree() {
        let rig = default_rig();
        assert_eq!(rig.joint_count(), 22);
        assert_eq!(rig.edges.len(), 21);
        rig.validate().unwrap();
    }

    #[test]
    fn joint_lookup_by_name() {
        let rig = default_rig();
        assert_eq!(rig.joint_index("hip"), Some(0));
        assert_eq!(rig.joint_index("r_elbow"), Some(11));
        assert_eq!(rig.joint_index("r_foot"), Some(21));
        assert_eq!(rig.joint_index("tail"), None);
    }

    #[test]
    fn cyclic_or_forward_referencing_edges_rejected() {
        let mut spec = (*default_rig()).clone();
        spec.edges[3] = (4, 3); // child already placed
        assert!(spec.validate().is_err());
    }
}
