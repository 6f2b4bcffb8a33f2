//! Wire protocol between a running stack and remote front ends: JSON text
//! frames, one message per frame. Transport lives in the CLI crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::grid::{CellClass, OccupancyGrid};
use crate::navigation::{GoalFrame, GoalId, GoalState, NavGoal};

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_PARTICLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPayload {
    pub angle_min: f64,
    /// Angle between consecutive entries of `ranges` (after striding).
    pub angle_increment: f64,
    pub range_max: f64,
    pub ranges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPayload {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    /// World coordinates of the outer corner of cell (0, 0).
    pub origin: [f64; 2],
    /// Run-length encoded cell classes, row-major from row 0 (lowest y).
    pub rle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalInfo {
    pub id: GoalId,
    pub state: GoalState,
    pub target: Pose2D,
    pub feedback: Pose2D,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub seq: u64,
    pub sim_time: f64,
    pub mode: String,
    pub true_pose: Pose2D,
    pub estimated_pose: Pose2D,
    /// Down-sampled particle cloud as `[x, y, theta]`.
    pub particles: Vec<[f64; 3]>,
    pub scan: Option<ScanPayload>,
    pub map_version: u64,
    /// Present on a client's first snapshot and whenever `map_version` changes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapPayload>,
    pub global_path: Vec<[f64; 2]>,
    pub goal: Option<GoalInfo>,
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub version: u32,
    pub id: Option<u64>,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_id: Option<GoalId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Ack(Ack),
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("protocol messages serialize")
    }
}

/// Commands accepted by the stack's serialized command queue.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    TeleopKey(char),
    SetGoal(NavGoal),
    /// Cancels the given goal, or the current one.
    CancelGoal(Option<GoalId>),
    SetParam { name: String, value: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum WireCommand {
    TeleopKey {
        key: String,
    },
    SetGoal {
        x: f64,
        #[serde(default)]
        y: f64,
        #[serde(default)]
        yaw: Option<f64>,
        #[serde(default)]
        frame: Option<GoalFrame>,
        #[serde(default)]
        quat_w: Option<f64>,
    },
    CancelGoal {
        #[serde(default)]
        goal_id: Option<GoalId>,
    },
    SetParam {
        name: String,
        value: f64,
    },
}

/// A command frame that could not be turned into a [`Command`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rejected {
    pub id: Option<u64>,
    pub reason: String,
}

impl Rejected {
    pub fn ack(&self) -> Ack {
        Ack {
            version: PROTOCOL_VERSION,
            id: self.id,
            accepted: false,
            reason: Some(self.reason.clone()),
            goal_id: None,
        }
    }
}

/// Parses one command frame. Returns the client's correlation id with the command.
pub fn parse_command(text: &str) -> std::result::Result<(Option<u64>, Command), Rejected> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| Rejected {
        id: None,
        reason: format!("malformed JSON: {e}"),
    })?;
    let id = value.get("id").and_then(|v| v.as_u64());
    let reject = |reason: String| Rejected { id, reason };
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_owned)
        .ok_or_else(|| reject("missing `kind`".into()))?;
    if !["teleop_key", "set_goal", "cancel_goal", "set_param"].contains(&kind.as_str()) {
        return Err(reject(format!("unknown kind `{kind}`")));
    }
    if let Some(obj) = value.as_object_mut() {
        obj.remove("id");
    }
    let wire: WireCommand = serde_json::from_value(value).map_err(|e| reject(format!("bad `{kind}` command: {e}")))?;
    let cmd = match wire {
        WireCommand::TeleopKey { key } => Command::TeleopKey(parse_key(&key).map_err(reject)?),
        WireCommand::SetGoal {
            x,
            y,
            yaw,
            frame,
            quat_w,
        } => {
            if !(x.is_finite() && y.is_finite()) {
                return Err(reject("goal position must be finite".into()));
            }
            let frame = frame.unwrap_or(GoalFrame::Map);
            let goal = match (yaw, quat_w) {
                (Some(_), Some(_)) => return Err(reject("give either `yaw` or `quat_w`, not both".into())),
                (Some(yaw), None) if yaw.is_finite() => NavGoal { frame, ..NavGoal::map(x, y, yaw) },
                (Some(_), None) => return Err(reject("yaw must be finite".into())),
                (None, w) => NavGoal {
                    frame,
                    x,
                    y,
                    quat_w: w.unwrap_or(1.0),
                    quat_z: None,
                },
            };
            goal.yaw().map_err(|e| reject(e.to_string()))?;
            Command::SetGoal(goal)
        }
        WireCommand::CancelGoal { goal_id } => Command::CancelGoal(goal_id),
        WireCommand::SetParam { name, value } => {
            if !value.is_finite() {
                return Err(reject("parameter value must be finite".into()));
            }
            Command::SetParam { name, value }
        }
    };
    Ok((id, cmd))
}

/// Encodes a command frame that [`parse_command`] reads back.
pub fn encode_command(id: Option<u64>, command: &Command) -> String {
    let mut v = match command {
        Command::TeleopKey(k) => {
            let key = if *k == ' ' { "space".to_string() } else { k.to_string() };
            serde_json::json!({ "kind": "teleop_key", "key": key })
        }
        Command::SetGoal(g) => {
            let frame = match g.frame {
                GoalFrame::Map => "map",
                GoalFrame::Robot => "robot",
            };
            match g.quat_z {
                // a full quaternion travels as its yaw
                Some(_) => serde_json::json!({ "kind": "set_goal", "frame": frame, "x": g.x, "y": g.y, "yaw": g.yaw().unwrap_or(0.0) }),
                None => serde_json::json!({ "kind": "set_goal", "frame": frame, "x": g.x, "y": g.y, "quat_w": g.quat_w }),
            }
        }
        Command::CancelGoal(id) => serde_json::json!({ "kind": "cancel_goal", "goal_id": id }),
        Command::SetParam { name, value } => serde_json::json!({ "kind": "set_param", "name": name, "value": value }),
    };
    if let Some(id) = id {
        v["id"] = id.into();
    }
    v.to_string()
}

fn parse_key(key: &str) -> std::result::Result<char, String> {
    if key == "space" {
        return Ok(' ');
    }
    let mut chars = key.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(format!("`key` must be a single character, got {key:?}")),
    }
}

fn class_code(c: CellClass) -> char {
    match c {
        CellClass::Occupied => 'O',
        CellClass::Free => 'F',
        CellClass::Unknown => 'U',
    }
}

pub fn encode_rle(classes: &[CellClass]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < classes.len() {
        let c = classes[i];
        let mut j = i;
        while j < classes.len() && classes[j] == c {
            j += 1;
        }
        out.push_str(&(j - i).to_string());
        out.push(class_code(c));
        i = j;
    }
    out
}

pub fn decode_rle(rle: &str, expected: usize) -> Result<Vec<CellClass>> {
    let bad = |reason: String| Error::InvalidParam(format!("bad map encoding: {reason}"));
    let mut out = Vec::with_capacity(expected);
    let mut count: usize = 0;
    let mut have_digits = false;
    for ch in rle.chars() {
        if let Some(d) = ch.to_digit(10) {
            count = count
                .checked_mul(10)
                .and_then(|c| c.checked_add(d as usize))
                .ok_or_else(|| bad("run length overflow".into()))?;
            have_digits = true;
            continue;
        }
        let class = match ch {
            'O' => CellClass::Occupied,
            'F' => CellClass::Free,
            'U' => CellClass::Unknown,
            other => return Err(bad(format!("unexpected character {other:?}"))),
        };
        if !have_digits || count == 0 {
            return Err(bad("run without a positive length".into()));
        }
        if out.len() + count > expected {
            return Err(bad(format!("more than {expected} cells")));
        }
        out.extend(std::iter::repeat_n(class, count));
        count = 0;
        have_digits = false;
    }
    if have_digits || out.len() != expected {
        return Err(bad(format!("decoded {} cells, expected {expected}", out.len())));
    }
    Ok(out)
}

impl MapPayload {
    pub fn from_grid(grid: &OccupancyGrid) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            resolution: grid.resolution(),
            origin: [grid.origin().x, grid.origin().y],
            rle: encode_rle(&grid.classes()),
        }
    }

    /// Trinary grid carrying the transmitted classes.
    pub fn to_grid(&self) -> Result<OccupancyGrid> {
        let classes = decode_rle(&self.rle, self.width * self.height)?;
        let mut grid = OccupancyGrid::new(
            self.width,
            self.height,
            self.resolution,
            Pose2D::new(self.origin[0], self.origin[1], 0.0),
        )?;
        for (i, c) in classes.into_iter().enumerate() {
            grid.set_class(i, c);
        }
        Ok(grid)
    }
}

/// Uniform-stride down-sampling to at most `limit` items.
pub fn stride_sample<T: Copy>(items: &[T], limit: usize) -> Vec<T> {
    if items.len() <= limit || limit == 0 {
        return if limit == 0 { Vec::new() } else { items.to_vec() };
    }
    let stride = items.len().div_ceil(limit);
    items.iter().step_by(stride).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoded_commands_parse_back() {
        let cmds = [
            Command::TeleopKey('i'),
            Command::TeleopKey(' '),
            Command::SetGoal(NavGoal::robot(1.0, 1.0)),
            Command::SetGoal(NavGoal::map(2.0, 3.0, 0.0)),
            Command::CancelGoal(Some(4)),
            Command::CancelGoal(None),
            Command::SetParam {
                name: "planner.max_vel_x".into(),
                value: 0.3,
            },
        ];
        for (i, c) in cmds.iter().enumerate() {
            let (id, back) = parse_command(&encode_command(Some(i as u64), c)).unwrap();
            assert_eq!(id, Some(i as u64));
            match (c, &back) {
                (Command::SetGoal(a), Command::SetGoal(b)) => {
                    assert_eq!((a.frame, a.x, a.y), (b.frame, b.x, b.y));
                    assert!((a.yaw().unwrap() - b.yaw().unwrap()).abs() < 1e-12);
                }
                _ => assert_eq!(c, &back),
            }
        }
        assert_eq!(parse_command(&encode_command(None, &cmds[0])).unwrap().0, None);
    }

    #[test]
    fn rle_examples_and_round_trip() {
        use CellClass::*;
        let cells = [Unknown, Unknown, Free, Occupied, Occupied, Occupied, Free];
        assert_eq!(encode_rle(&cells), "2U1F3O1F");
        assert_eq!(decode_rle("2U1F3O1F", 7).unwrap(), cells);
        assert_eq!(encode_rle(&[]), "");
        assert!(decode_rle("2U1F", 4).is_err());
        assert!(decode_rle("2U1F3", 3).is_err());
        assert!(decode_rle("0U", 0).is_err());
        assert!(decode_rle("2X", 2).is_err());
    }

    #[test]
    fn map_payload_round_trip() {
        let mut g = OccupancyGrid::new(7, 5, 0.05, Pose2D::new(-1.0, 2.0, 0.0)).unwrap();
        for i in 0..g.len() {
            g.set_class(i, [CellClass::Free, CellClass::Occupied, CellClass::Unknown][i * 7 % 3]);
        }
        let p = MapPayload::from_grid(&g);
        let back = p.to_grid().unwrap();
        assert_eq!(back.classes(), g.classes());
        assert_eq!(back.origin(), g.origin());
    }

    #[test]
    fn parses_each_kind() {
        assert_eq!(
            parse_command(r#"{"kind":"teleop_key","key":"i","id":4}"#).unwrap(),
            (Some(4), Command::TeleopKey('i'))
        );
        assert_eq!(
            parse_command(r#"{"kind":"teleop_key","key":"space"}"#).unwrap().1,
            Command::TeleopKey(' ')
        );
        let (_, cmd) = parse_command(r#"{"kind":"set_goal","x":1.0,"y":2.0,"yaw":-1.5}"#).unwrap();
        let Command::SetGoal(g) = cmd else { panic!() };
        assert_eq!(g.frame, GoalFrame::Map);
        assert!((g.yaw().unwrap() + 1.5).abs() < 1e-12);
        let (_, cmd) = parse_command(r#"{"kind":"set_goal","x":1.0,"frame":"robot","quat_w":1.0}"#).unwrap();
        assert_eq!(cmd, Command::SetGoal(NavGoal::robot(1.0, 1.0)));
        assert_eq!(
            parse_command(r#"{"kind":"cancel_goal"}"#).unwrap().1,
            Command::CancelGoal(None)
        );
        assert_eq!(
            parse_command(r#"{"kind":"set_param","name":"planner.max_vel_x","value":0.3}"#).unwrap().1,
            Command::SetParam {
                name: "planner.max_vel_x".into(),
                value: 0.3
            }
        );
    }

    #[test]
    fn rejects_bad_frames() {
        let r = parse_command(r#"{"kind":"zzz","id":9}"#).unwrap_err();
        assert_eq!(r.id, Some(9));
        assert!(r.reason.contains("unknown kind"));
        assert!(!r.ack().accepted);
        assert!(parse_command("{not json").is_err());
        assert!(parse_command(r#"{"key":"i"}"#).is_err());
        assert!(parse_command(r#"{"kind":"teleop_key","key":"ij"}"#).is_err());
        assert!(parse_command(r#"{"kind":"set_goal","x":1.0,"frame":"robot","quat_w":2.0}"#).is_err());
        assert!(parse_command(r#"{"kind":"set_goal","x":1.0,"yaw":1.0,"quat_w":1.0}"#).is_err());
        assert!(parse_command(r#"{"kind":"set_goal","x":"a"}"#).is_err());
    }

    #[test]
    fn snapshot_json_shape() {
        let snap = Snapshot {
            version: PROTOCOL_VERSION,
            seq: 3,
            sim_time: 1.5,
            mode: "navigation".into(),
            true_pose: Pose2D::new(1.0, 2.0, 0.5),
            estimated_pose: Pose2D::new(1.0, 2.0, 0.5),
            particles: vec![[1.0, 2.0, 0.5]],
            scan: None,
            map_version: 1,
            map: None,
            global_path: vec![],
            goal: None,
            collision: false,
        };
        let text = ServerMessage::Snapshot(snap.clone()).to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["type"], "snapshot");
        assert_eq!(v["version"], 1);
        assert_eq!(v["true_pose"]["theta"], 0.5);
        assert!(v.get("map").is_none());
        assert_eq!(serde_json::from_str::<ServerMessage>(&text).unwrap(), ServerMessage::Snapshot(snap));
    }

    #[test]
    fn stride_limits() {
        let v: Vec<u32> = (0..500).collect();
        let s = stride_sample(&v, 200);
        assert!(s.len() <= 200 && s.len() >= 100);
        assert_eq!(stride_sample(&v[..10], 200).len(), 10);
    }
}
