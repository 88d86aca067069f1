//! Robot description for the planar simulator: links, revolute joints, foot
//! sites, and the bundled 7-link biped.

use nalgebra::Vector2;

use crate::config::{FootSpec, JointSpec, LinkSpec, RobotModelConfig};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("link {0}: {1}")]
    BadLink(String, String),
    #[error("joint {0}: {1}")]
    BadJoint(String, String),
    #[error("model is not a topologically ordered tree: joint {0} has child {1}")]
    NotATree(String, usize),
    #[error("foot site references missing link {0}")]
    BadFoot(usize),
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub mass: f64,
    /// CoM in the link frame.
    pub com: Vector2<f64>,
    /// Rotational inertia about the CoM, kg·m².
    pub inertia: f64,
    pub length: f64,
    /// Far end of the link in its own frame, used as a collision probe.
    pub tip: Vector2<f64>,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    /// Anchor in the parent link frame.
    pub anchor: Vector2<f64>,
    pub q_min: f64,
    pub q_max: f64,
    pub torque_limit: f64,
    pub q_default: f64,
    pub kp: f64,
    pub kd: f64,
}

#[derive(Debug, Clone)]
pub struct FootSite {
    pub link: usize,
    /// Reference site in the link frame; foot height and velocity for the
    /// reward machinery are measured here.
    pub offset: Vector2<f64>,
    /// Rear contact point in the link frame.
    pub heel: Vector2<f64>,
    /// Front contact point in the link frame.
    pub toe: Vector2<f64>,
}

/// Tree-structured planar robot. Link 0 is the floating (or fixed) base;
/// joint `i` drives link `i + 1`, so the joint order is topological.
#[derive(Debug, Clone)]
pub struct RobotModel {
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub feet: Vec<FootSite>,
    pub fixed_base: bool,
}

impl RobotModel {
    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    /// Generalized-coordinate dimension: base (x, z, pitch) + joints.
    pub fn dof(&self) -> usize {
        3 + self.joints.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn default_joint_positions(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(
            self.joints.len(),
            self.joints.iter().map(|j| j.q_default),
        )
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for l in &self.links {
            if l.mass <= 0.0 {
                return Err(ModelError::BadLink(l.name.clone(), "mass must be > 0".into()));
            }
            if l.inertia <= 0.0 {
                return Err(ModelError::BadLink(
                    l.name.clone(),
                    "inertia must be > 0".into(),
                ));
            }
        }
        for (i, j) in self.joints.iter().enumerate() {
            if j.q_min >= j.q_max {
                return Err(ModelError::BadJoint(
                    j.name.clone(),
                    "q_min must be < q_max".into(),
                ));
            }
            if j.torque_limit <= 0.0 {
                return Err(ModelError::BadJoint(
                    j.name.clone(),
                    "torque_limit must be > 0".into(),
                ));
            }
            if j.child != i + 1 || j.parent > i {
                return Err(ModelError::NotATree(j.name.clone(), j.child));
            }
        }
        for f in &self.feet {
            if f.link >= self.links.len() {
                return Err(ModelError::BadFoot(f.link));
            }
        }
        Ok(())
    }

    /// Joints on the path from the base to `link`, in base-to-leaf order.
    pub fn path_to(&self, link: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = link;
        while cur != 0 {
            let j = cur - 1;
            path.push(j);
            cur = self.joints[j].parent;
        }
        path.reverse();
        path
    }

    pub fn from_config(cfg: &RobotModelConfig) -> Result<RobotModel, ModelError> {
        let model = match (&cfg.links, &cfg.joints) {
            (Some(links), Some(joints)) => {
                let links = links
                    .iter()
                    .map(|l| Link {
                        name: l.name.clone(),
                        mass: l.mass,
                        com: Vector2::new(l.com[0], l.com[1]),
                        inertia: l.inertia,
                        length: l.length,
                        tip: Vector2::new(0.0, -l.length),
                    })
                    .collect();
                let joints = joints
                    .iter()
                    .map(|j| Joint {
                        name: j.name.clone(),
                        parent: j.parent,
                        child: j.child,
                        anchor: Vector2::new(j.anchor[0], j.anchor[1]),
                        q_min: j.q_min,
                        q_max: j.q_max,
                        torque_limit: j.torque_limit,
                        q_default: j.q_default,
                        kp: j.kp,
                        kd: j.kd,
                    })
                    .collect();
                let feet = cfg
                    .feet
                    .as_ref()
                    .map(|feet| {
                        feet.iter()
                            .map(|f| FootSite {
                                link: f.link,
                                offset: Vector2::new(f.offset[0], f.offset[1]),
                                heel: Vector2::new(f.heel[0], f.heel[1]),
                                toe: Vector2::new(f.toe[0], f.toe[1]),
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                RobotModel {
                    links,
                    joints,
                    feet,
                    fixed_base: cfg.fixed_base.unwrap_or(false),
                }
            }
            _ => {
                let mut m = planar_biped();
                if let Some(fixed) = cfg.fixed_base {
                    m.fixed_base = fixed;
                }
                m
            }
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_config(&self) -> RobotModelConfig {
        RobotModelConfig {
            links: Some(
                self.links
                    .iter()
                    .map(|l| LinkSpec {
                        name: l.name.clone(),
                        mass: l.mass,
                        com: [l.com.x, l.com.y],
                        inertia: l.inertia,
                        length: l.length,
                    })
                    .collect(),
            ),
            joints: Some(
                self.joints
                    .iter()
                    .map(|j| JointSpec {
                        name: j.name.clone(),
                        parent: j.parent,
                        child: j.child,
                        anchor: [j.anchor.x, j.anchor.y],
                        q_min: j.q_min,
                        q_max: j.q_max,
                        torque_limit: j.torque_limit,
                        q_default: j.q_default,
                        kp: j.kp,
                        kd: j.kd,
                    })
                    .collect(),
            ),
            feet: Some(
                self.feet
                    .iter()
                    .map(|f| FootSpec {
                        link: f.link,
                        offset: [f.offset.x, f.offset.y],
                        heel: [f.heel.x, f.heel.y],
                        toe: [f.toe.x, f.toe.y],
                    })
                    .collect(),
            ),
            fixed_base: Some(self.fixed_base),
        }
    }
}

fn rod(name: &str, mass: f64, length: f64) -> Link {
    Link {
        name: name.to_string(),
        mass,
        com: Vector2::new(0.0, -length / 2.0),
        inertia: mass * length * length / 12.0,
        length,
        tip: Vector2::new(0.0, -length),
    }
}

/// Bundled sagittal-plane biped: torso + hip/knee/ankle per leg.
///
/// The base frame sits at hip level; the torso extends upward. With the
/// default joint positions the feet rest flat and the base stands at
/// ~0.68 m, matching the default desired height.
pub fn planar_biped() -> RobotModel {
    let torso = Link {
        name: "torso".to_string(),
        mass: 10.0,
        com: Vector2::new(0.0, 0.2),
        inertia: 10.0 * 0.4 * 0.4 / 12.0,
        length: 0.4,
        tip: Vector2::new(0.0, 0.4),
    };
    let mut links = vec![torso];
    let mut joints = Vec::new();
    let mut feet = Vec::new();

    let thigh_len = 0.34;
    let shank_len = 0.34;
    let hip_q0 = -0.35;
    let knee_q0 = 0.7;
    let ankle_q0 = -0.35;

    for side in ["left", "right"] {
        let thigh = links.len();
        links.push(rod(&format!("{side}_thigh"), 2.0, thigh_len));
        joints.push(Joint {
            name: format!("{side}_hip"),
            parent: 0,
            child: thigh,
            anchor: Vector2::new(0.0, 0.0),
            q_min: -1.5,
            q_max: 1.5,
            torque_limit: 60.0,
            q_default: hip_q0,
            kp: 60.0,
            kd: 2.0,
        });
        let shank = links.len();
        links.push(rod(&format!("{side}_shank"), 1.5, shank_len));
        joints.push(Joint {
            name: format!("{side}_knee"),
            parent: thigh,
            child: shank,
            anchor: Vector2::new(0.0, -thigh_len),
            q_min: -0.1,
            q_max: 2.2,
            torque_limit: 60.0,
            q_default: knee_q0,
            kp: 60.0,
            kd: 2.0,
        });
        let foot = links.len();
        links.push(Link {
            name: format!("{side}_foot"),
            mass: 0.5,
            com: Vector2::new(0.0, -0.02),
            inertia: 0.002,
            length: 0.1,
            tip: Vector2::new(0.05, -0.04),
        });
        joints.push(Joint {
            name: format!("{side}_ankle"),
            parent: shank,
            child: foot,
            anchor: Vector2::new(0.0, -shank_len),
            q_min: -1.2,
            q_max: 1.2,
            torque_limit: 30.0,
            q_default: ankle_q0,
            kp: 30.0,
            kd: 1.0,
        });
        feet.push(FootSite {
            link: foot,
            offset: Vector2::new(0.0, -0.04),
            heel: Vector2::new(-0.06, -0.04),
            toe: Vector2::new(0.1, -0.04),
        });
    }

    RobotModel {
        links,
        joints,
        feet,
        fixed_base: false,
    }
}

/// Two-link fixed-base pendulum used by the dynamics validation suite.
pub fn double_pendulum(m1: f64, l1: f64, m2: f64, l2: f64) -> RobotModel {
    let base = Link {
        name: "anchor".to_string(),
        mass: 1.0,
        com: Vector2::zeros(),
        inertia: 1.0,
        length: 0.0,
        tip: Vector2::zeros(),
    };
    let links = vec![base, rod("link1", m1, l1), rod("link2", m2, l2)];
    let joints = vec![
        Joint {
            name: "shoulder".to_string(),
            parent: 0,
            child: 1,
            anchor: Vector2::zeros(),
            q_min: -10.0,
            q_max: 10.0,
            torque_limit: 1000.0,
            q_default: 0.0,
            kp: 0.0,
            kd: 0.0,
        },
        Joint {
            name: "elbow".to_string(),
            parent: 1,
            child: 2,
            anchor: Vector2::new(0.0, -l1),
            q_min: -10.0,
            q_max: 10.0,
            torque_limit: 1000.0,
            q_default: 0.0,
            kp: 0.0,
            kd: 0.0,
        },
    ];
    RobotModel {
        links,
        joints,
        feet: Vec::new(),
        fixed_base: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn biped_is_valid() {
        let m = planar_biped();
        m.validate().unwrap();
        assert_eq!(m.num_joints(), 6);
        assert_eq!(m.dof(), 9);
        assert_eq!(m.feet.len(), 2);
    }

    #[test]
    fn paths_follow_the_leg_chain() {
        let m = planar_biped();
        // left foot link is 3, driven by joints 0, 1, 2
        assert_eq!(m.path_to(3), vec![0, 1, 2]);
        assert_eq!(m.path_to(6), vec![3, 4, 5]);
        assert_eq!(m.path_to(0), Vec::<usize>::new());
    }

    #[test]
    fn config_roundtrip() {
        let m = planar_biped();
        let cfg = m.to_config();
        let back = RobotModel::from_config(&cfg).unwrap();
        assert_eq!(back.links.len(), m.links.len());
        assert_eq!(back.joints[2].q_default, m.joints[2].q_default);
    }

    #[test]
    fn invalid_mass_rejected() {
        let mut m = planar_biped();
        m.links[1].mass = -1.0;
        assert!(m.validate().is_err());
    }
}
