//! Reader and writer for a deliberately small URDF dialect: `robot`, `link`
//! (primitive `collision` geometry, opaque named `visual`), and `joint` with
//! `origin`/`axis`/`limit`. Anything outside that subset is rejected loudly
//! rather than dropped, so a model that parses is a model we fully honor.

use crate::geometry::{Pose3D, Quat};
use crate::model::{
    CollisionShape, JointKind, JointSpec, LinkSpec, ModelViolation, RobotModel, ShapeKind,
    UnitKind,
};
use std::collections::HashSet;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UrdfError {
    #[error("malformed XML: {0}")]
    XmlMalformed(String),
    #[error("unsupported element <{0}>")]
    UnsupportedElement(String),
    #[error("unsupported attribute {attribute:?} on <{element}>")]
    UnsupportedAttribute { element: String, attribute: String },
    #[error("missing attribute {attribute:?} on <{element}>")]
    MissingAttribute { element: String, attribute: String },
    #[error("attribute {attribute:?} on <{element}> has an unparsable value")]
    BadValue { element: String, attribute: String },
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("reference to undeclared link {0:?}")]
    DanglingReference(String),
    #[error("joint {0:?} closes a cycle")]
    CycleDetected(String),
    #[error("no root link: every link is the child of some joint")]
    MissingRoot,
    #[error("invalid model: {0}")]
    InvalidModel(ModelViolation),
}

type Result<T> = std::result::Result<T, UrdfError>;

/// Parses URDF text into a validated [`RobotModel`] with `unit_kind`
/// [`UnitKind::Generic`].
pub fn parse_urdf(text: &str) -> Result<RobotModel> {
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| UrdfError::XmlMalformed(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(UrdfError::UnsupportedElement(robot.tag_name().name().to_string()));
    }
    check_attrs(&robot, &["name"])?;
    let name = req_attr(&robot, "name")?.to_string();

    let mut links = Vec::new();
    let mut joints = Vec::new();
    let mut link_names = HashSet::new();
    let mut joint_names = HashSet::new();

    for child in element_children(&robot) {
        match child.tag_name().name() {
            "link" => {
                let link = parse_link(&child)?;
                if !link_names.insert(link.name.clone()) {
                    return Err(UrdfError::DuplicateName(link.name));
                }
                links.push(link);
            }
            "joint" => {
                let joint = parse_joint(&child)?;
                if !joint_names.insert(joint.name.clone()) {
                    return Err(UrdfError::DuplicateName(joint.name));
                }
                joints.push(joint);
            }
            other => return Err(UrdfError::UnsupportedElement(other.to_string())),
        }
    }

    for j in &joints {
        for link in [&j.parent, &j.child] {
            if !link_names.contains(link) {
                return Err(UrdfError::DanglingReference(link.clone()));
            }
        }
    }

    // The root is the unique link that is nobody's child.
    let children: HashSet<&str> = joints.iter().map(|j| j.child.as_str()).collect();
    let mut roots = links.iter().filter(|l| !children.contains(l.name.as_str()));
    let root_link = match roots.next() {
        Some(l) => l.name.clone(),
        None => {
            return if links.is_empty() {
                Err(UrdfError::MissingRoot)
            } else {
                // Every link has a parent, so some joint closes a cycle.
                Err(UrdfError::CycleDetected(joints.last().unwrap().name.clone()))
            };
        }
    };

    let model = RobotModel { name, unit_kind: UnitKind::Generic, links, joints, root_link };
    for v in model.validate() {
        return Err(match v {
            ModelViolation::DuplicateLinkName(n) | ModelViolation::DuplicateJointName(n) => {
                UrdfError::DuplicateName(n)
            }
            ModelViolation::DanglingReference { link, .. } => UrdfError::DanglingReference(link),
            ModelViolation::CycleDetected(j) => UrdfError::CycleDetected(j),
            other => UrdfError::InvalidModel(other),
        });
    }
    Ok(model)
}

fn element_children<'a, 'd>(
    node: &'a roxmltree::Node<'a, 'd>,
) -> impl Iterator<Item = roxmltree::Node<'a, 'd>> {
    node.children().filter(|c| c.is_element())
}

fn check_attrs(node: &roxmltree::Node, allowed: &[&str]) -> Result<()> {
    for a in node.attributes() {
        if !allowed.contains(&a.name()) {
            return Err(UrdfError::UnsupportedAttribute {
                element: node.tag_name().name().to_string(),
                attribute: a.name().to_string(),
            });
        }
    }
    Ok(())
}

fn req_attr<'a>(node: &roxmltree::Node<'a, '_>, name: &str) -> Result<&'a str> {
    node.attribute(name).ok_or_else(|| UrdfError::MissingAttribute {
        element: node.tag_name().name().to_string(),
        attribute: name.to_string(),
    })
}

fn parse_scalar(node: &roxmltree::Node, attr: &str) -> Result<f64> {
    req_attr(node, attr)?.trim().parse().map_err(|_| UrdfError::BadValue {
        element: node.tag_name().name().to_string(),
        attribute: attr.to_string(),
    })
}

fn parse_triplet(node: &roxmltree::Node, attr: &str, value: &str) -> Result<[f64; 3]> {
    let bad = || UrdfError::BadValue {
        element: node.tag_name().name().to_string(),
        attribute: attr.to_string(),
    };
    let mut it = value.split_whitespace();
    let mut out = [0.0; 3];
    for slot in &mut out {
        *slot = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    }
    if it.next().is_some() {
        return Err(bad());
    }
    Ok(out)
}

fn parse_origin(node: &roxmltree::Node) -> Result<Pose3D> {
    check_attrs(node, &["xyz", "rpy"])?;
    let xyz = match node.attribute("xyz") {
        Some(v) => parse_triplet(node, "xyz", v)?,
        None => [0.0; 3],
    };
    let rotation = match node.attribute("rpy") {
        Some(v) => {
            let rpy = parse_triplet(node, "rpy", v)?;
            Quat::from_rpy(rpy[0], rpy[1], rpy[2])
        }
        None => Quat::IDENTITY,
    };
    Ok(Pose3D { translation: xyz, rotation })
}

fn parse_geometry(node: &roxmltree::Node) -> Result<ShapeKind> {
    check_attrs(node, &[])?;
    let mut shapes = element_children(node);
    let shape = shapes
        .next()
        .ok_or_else(|| UrdfError::MissingAttribute {
            element: "geometry".into(),
            attribute: "shape".into(),
        })?;
    if shapes.next().is_some() {
        return Err(UrdfError::UnsupportedElement("geometry with multiple shapes".into()));
    }
    match shape.tag_name().name() {
        "sphere" => {
            check_attrs(&shape, &["radius"])?;
            Ok(ShapeKind::Sphere { radius: parse_scalar(&shape, "radius")? })
        }
        "box" => {
            check_attrs(&shape, &["size"])?;
            let size = parse_triplet(&shape, "size", req_attr(&shape, "size")?)?;
            Ok(ShapeKind::Box { size })
        }
        "cylinder" => {
            check_attrs(&shape, &["radius", "length"])?;
            Ok(ShapeKind::Cylinder {
                radius: parse_scalar(&shape, "radius")?,
                length: parse_scalar(&shape, "length")?,
            })
        }
        "capsule" => {
            check_attrs(&shape, &["radius", "length"])?;
            Ok(ShapeKind::Capsule {
                radius: parse_scalar(&shape, "radius")?,
                length: parse_scalar(&shape, "length")?,
            })
        }
        other => Err(UrdfError::UnsupportedElement(other.to_string())),
    }
}

fn parse_link(node: &roxmltree::Node) -> Result<LinkSpec> {
    check_attrs(node, &["name"])?;
    let name = req_attr(node, "name")?.to_string();
    let mut collision = None;
    let mut visual_tag = None;
    for child in element_children(node) {
        match child.tag_name().name() {
            "collision" => {
                check_attrs(&child, &[])?;
                let mut origin = Pose3D::IDENTITY;
                let mut kind = None;
                for c in element_children(&child) {
                    match c.tag_name().name() {
                        "origin" => origin = parse_origin(&c)?,
                        "geometry" => kind = Some(parse_geometry(&c)?),
                        other => return Err(UrdfError::UnsupportedElement(other.to_string())),
                    }
                }
                let kind = kind.ok_or_else(|| UrdfError::MissingAttribute {
                    element: "collision".into(),
                    attribute: "geometry".into(),
                })?;
                collision = Some(CollisionShape { origin, kind });
            }
            "visual" => {
                check_attrs(&child, &["name"])?;
                if let Some(extra) = element_children(&child).next() {
                    return Err(UrdfError::UnsupportedElement(
                        extra.tag_name().name().to_string(),
                    ));
                }
                visual_tag = Some(req_attr(&child, "name")?.to_string());
            }
            other => return Err(UrdfError::UnsupportedElement(other.to_string())),
        }
    }
    Ok(LinkSpec { name, collision, visual_tag })
}

fn parse_joint(node: &roxmltree::Node) -> Result<JointSpec> {
    check_attrs(node, &["name", "type"])?;
    let name = req_attr(node, "name")?.to_string();
    let kind = match req_attr(node, "type")? {
        "revolute" => JointKind::Revolute,
        "continuous" => JointKind::Continuous,
        "prismatic" => JointKind::Prismatic,
        "fixed" => JointKind::Fixed,
        _ => {
            return Err(UrdfError::BadValue { element: "joint".into(), attribute: "type".into() })
        }
    };
    let mut origin = Pose3D::IDENTITY;
    let mut parent = None;
    let mut child_link = None;
    // URDF's default motion axis.
    let mut axis = [1.0, 0.0, 0.0];
    let mut limits = None;
    let mut max_velocity = 1.0;
    for child in element_children(node) {
        match child.tag_name().name() {
            "origin" => origin = parse_origin(&child)?,
            "parent" => {
                check_attrs(&child, &["link"])?;
                parent = Some(req_attr(&child, "link")?.to_string());
            }
            "child" => {
                check_attrs(&child, &["link"])?;
                child_link = Some(req_attr(&child, "link")?.to_string());
            }
            "axis" => {
                check_attrs(&child, &["xyz"])?;
                axis = parse_triplet(&child, "xyz", req_attr(&child, "xyz")?)?;
            }
            "limit" => {
                check_attrs(&child, &["lower", "upper", "velocity"])?;
                match (child.attribute("lower"), child.attribute("upper")) {
                    (Some(_), Some(_)) => {
                        limits =
                            Some((parse_scalar(&child, "lower")?, parse_scalar(&child, "upper")?));
                    }
                    (None, None) => {}
                    _ => {
                        let missing =
                            if child.attribute("lower").is_none() { "lower" } else { "upper" };
                        return Err(UrdfError::MissingAttribute {
                            element: "limit".into(),
                            attribute: missing.into(),
                        });
                    }
                }
                if child.attribute("velocity").is_some() {
                    max_velocity = parse_scalar(&child, "velocity")?;
                }
            }
            other => return Err(UrdfError::UnsupportedElement(other.to_string())),
        }
    }
    let missing = |attribute: &str| UrdfError::MissingAttribute {
        element: "joint".into(),
        attribute: attribute.into(),
    };
    Ok(JointSpec {
        name,
        kind,
        parent: parent.ok_or_else(|| missing("parent"))?,
        child: child_link.ok_or_else(|| missing("child"))?,
        origin,
        axis,
        limits,
        max_velocity,
    })
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn write_origin(out: &mut String, indent: &str, pose: &Pose3D) {
    let t = pose.translation;
    let (r, p, y) = pose.rotation.to_rpy();
    let has_xyz = t != [0.0; 3];
    let has_rpy = (r, p, y) != (0.0, 0.0, 0.0);
    if !has_xyz && !has_rpy {
        return;
    }
    let mut attrs = String::new();
    if has_xyz {
        let _ = write!(attrs, " xyz=\"{} {} {}\"", t[0], t[1], t[2]);
    }
    if has_rpy {
        let _ = write!(attrs, " rpy=\"{r} {p} {y}\"");
    }
    let _ = writeln!(out, "{indent}<origin{attrs}/>");
}

/// Renders a model back to URDF text. Parsing the output recovers the model
/// (rotations re-extracted through roll/pitch/yaw may differ at the 1e-12
/// level). `unit_kind` has no URDF representation and is not written.
pub fn serialize_urdf(model: &RobotModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<robot name=\"{}\">", esc(&model.name));
    for link in &model.links {
        if link.collision.is_none() && link.visual_tag.is_none() {
            let _ = writeln!(out, "  <link name=\"{}\"/>", esc(&link.name));
            continue;
        }
        let _ = writeln!(out, "  <link name=\"{}\">", esc(&link.name));
        if let Some(c) = &link.collision {
            let _ = writeln!(out, "    <collision>");
            write_origin(&mut out, "      ", &c.origin);
            let _ = writeln!(out, "      <geometry>");
            let shape = match c.kind {
                ShapeKind::Sphere { radius } => format!("<sphere radius=\"{radius}\"/>"),
                ShapeKind::Box { size } => {
                    format!("<box size=\"{} {} {}\"/>", size[0], size[1], size[2])
                }
                ShapeKind::Cylinder { radius, length } => {
                    format!("<cylinder radius=\"{radius}\" length=\"{length}\"/>")
                }
                ShapeKind::Capsule { radius, length } => {
                    format!("<capsule radius=\"{radius}\" length=\"{length}\"/>")
                }
            };
            let _ = writeln!(out, "        {shape}");
            let _ = writeln!(out, "      </geometry>");
            let _ = writeln!(out, "    </collision>");
        }
        if let Some(tag) = &link.visual_tag {
            let _ = writeln!(out, "    <visual name=\"{}\"/>", esc(tag));
        }
        let _ = writeln!(out, "  </link>");
    }
    for j in &model.joints {
        let kind = match j.kind {
            JointKind::Revolute => "revolute",
            JointKind::Continuous => "continuous",
            JointKind::Prismatic => "prismatic",
            JointKind::Fixed => "fixed",
        };
        let _ = writeln!(out, "  <joint name=\"{}\" type=\"{kind}\">", esc(&j.name));
        write_origin(&mut out, "    ", &j.origin);
        let _ = writeln!(out, "    <parent link=\"{}\"/>", esc(&j.parent));
        let _ = writeln!(out, "    <child link=\"{}\"/>", esc(&j.child));
        if j.is_actuated() {
            let _ =
                writeln!(out, "    <axis xyz=\"{} {} {}\"/>", j.axis[0], j.axis[1], j.axis[2]);
            let mut attrs = String::new();
            if let Some((lo, hi)) = j.limits {
                let _ = write!(attrs, " lower=\"{lo}\" upper=\"{hi}\"");
            }
            let _ = write!(attrs, " velocity=\"{}\"", j.max_velocity);
            let _ = writeln!(out, "    <limit{attrs}/>");
        }
        let _ = writeln!(out, "  </joint>");
    }
    out.push_str("</robot>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARM: &str = r#"
<robot name="mini">
  <link name="base">
    <collision>
      <origin xyz="0 0 0.1"/>
      <geometry><cylinder radius="0.2" length="0.2"/></geometry>
    </collision>
    <visual name="base_plate"/>
  </link>
  <link name="upper">
    <collision>
      <origin xyz="0 0 0.25" rpy="0 0 0"/>
      <geometry><capsule radius="0.05" length="0.5"/></geometry>
    </collision>
  </link>
  <joint name="shoulder" type="revolute">
    <origin xyz="0 0 0.2"/>
    <parent link="base"/>
    <child link="upper"/>
    <axis xyz="0 1 0"/>
    <limit lower="-1.5" upper="1.5" velocity="2"/>
  </joint>
</robot>
"#;

    #[test]
    fn parses_supported_subset() {
        let m = parse_urdf(ARM).unwrap();
        assert_eq!(m.name, "mini");
        assert_eq!(m.root_link, "base");
        assert_eq!(m.links.len(), 2);
        assert_eq!(m.joints.len(), 1);
        assert_eq!(m.links[0].visual_tag.as_deref(), Some("base_plate"));
        let j = &m.joints[0];
        assert_eq!(j.kind, JointKind::Revolute);
        assert_eq!(j.axis, [0.0, 1.0, 0.0]);
        assert_eq!(j.limits, Some((-1.5, 1.5)));
        assert_eq!(j.max_velocity, 2.0);
        assert!(m.validate().is_empty());
    }

    #[test]
    fn rejects_mesh_geometry() {
        let text = r#"<robot name="m"><link name="a">
            <collision><geometry><mesh filename="x.stl"/></geometry></collision>
        </link></robot>"#;
        assert_eq!(parse_urdf(text), Err(UrdfError::UnsupportedElement("mesh".into())));
    }

    #[test]
    fn rejects_transmission_and_gazebo() {
        for tag in ["transmission", "gazebo"] {
            let text = format!(r#"<robot name="m"><link name="a"/><{tag}/></robot>"#);
            assert_eq!(parse_urdf(&text), Err(UrdfError::UnsupportedElement(tag.into())));
        }
    }

    #[test]
    fn rejects_malformed_xml() {
        assert!(matches!(parse_urdf("<robot name='m'><link"), Err(UrdfError::XmlMalformed(_))));
    }

    #[test]
    fn rejects_duplicate_names() {
        let text = r#"<robot name="m"><link name="a"/><link name="a"/></robot>"#;
        assert_eq!(parse_urdf(text), Err(UrdfError::DuplicateName("a".into())));
    }

    #[test]
    fn rejects_dangling_reference() {
        let text = r#"<robot name="m"><link name="a"/>
            <joint name="j" type="fixed"><parent link="a"/><child link="ghost"/></joint>
        </robot>"#;
        assert_eq!(parse_urdf(text), Err(UrdfError::DanglingReference("ghost".into())));
    }

    #[test]
    fn rejects_cycle() {
        let text = r#"<robot name="m"><link name="a"/><link name="b"/>
            <joint name="j1" type="fixed"><parent link="a"/><child link="b"/></joint>
            <joint name="j2" type="fixed"><parent link="b"/><child link="a"/></joint>
        </robot>"#;
        assert!(matches!(parse_urdf(text), Err(UrdfError::CycleDetected(_))));
    }

    #[test]
    fn round_trip_is_stable() {
        let m1 = parse_urdf(ARM).unwrap();
        let m2 = parse_urdf(&serialize_urdf(&m1)).unwrap();
        assert_eq!(m1, m2);
        let m3 = parse_urdf(&serialize_urdf(&m2)).unwrap();
        assert_eq!(m2, m3);
    }
}
