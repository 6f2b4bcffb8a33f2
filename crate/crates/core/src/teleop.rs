//! Keyboard teleoperation with the classic `teleop_twist_keyboard` layout.

use serde::{Deserialize, Serialize};

use crate::geometry::Twist2D;

/// Direction keys and their (linear, angular) sign pattern.
pub const MOVE_BINDINGS: [(char, i8, i8); 10] = [
    ('u', 1, 1),
    ('i', 1, 0),
    ('o', 1, -1),
    ('j', 0, 1),
    ('k', 0, 0),
    ('l', 0, -1),
    ('m', -1, -1),
    (',', -1, 0),
    ('.', -1, 1),
    (' ', 0, 0),
];

/// Speed keys and their (linear, angular) multipliers.
pub const SPEED_BINDINGS: [(char, f64, f64); 6] = [
    ('q', 1.1, 1.1),
    ('z', 0.9, 0.9),
    ('w', 1.1, 1.0),
    ('x', 0.9, 1.0),
    ('e', 1.0, 1.1),
    ('c', 1.0, 0.9),
];

/// The key table shown to operators; front ends render this same text.
pub const KEYMAP_TABLE: &str = "\
Moving around:
   u    i    o
   j    k    l
   m    ,    .

i/,   : forward/backward
j/l   : spin left/right
u/o   : forward arc left/right
m/.   : backward arc left/right
k     : stop
space : stop

q/z : increase/decrease all speeds by 10%
w/x : increase/decrease linear speed by 10%
e/c : increase/decrease angular speed by 10%

anything else : no change
";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeleopConfig {
    pub linear: f64,
    pub angular: f64,
    pub scale_linear: f64,
    pub scale_angular: f64,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            linear: 0.1,
            angular: 0.2,
            scale_linear: 5.0,
            scale_angular: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopState {
    pub linear: f64,
    pub angular: f64,
    pub scale_linear: f64,
    pub scale_angular: f64,
    pattern: (i8, i8),
}

/// What a key did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Direction,
    Speed,
    Unmapped,
}

pub fn classify_key(key: char) -> KeyKind {
    let key = key.to_ascii_lowercase();
    if MOVE_BINDINGS.iter().any(|b| b.0 == key) {
        KeyKind::Direction
    } else if SPEED_BINDINGS.iter().any(|b| b.0 == key) {
        KeyKind::Speed
    } else {
        KeyKind::Unmapped
    }
}

impl TeleopState {
    pub fn new(cfg: TeleopConfig) -> Self {
        Self {
            linear: cfg.linear,
            angular: cfg.angular,
            scale_linear: cfg.scale_linear,
            scale_angular: cfg.scale_angular,
            pattern: (0, 0),
        }
    }

    pub fn twist(&self) -> Twist2D {
        Twist2D::new(
            self.pattern.0 as f64 * self.linear * self.scale_linear,
            self.pattern.1 as f64 * self.angular * self.scale_angular,
        )
    }

    /// Applies one key press and returns the twist to emit.
    pub fn apply(&mut self, key: char) -> Twist2D {
        let key = key.to_ascii_lowercase();
        if let Some(&(_, v, w)) = MOVE_BINDINGS.iter().find(|b| b.0 == key) {
            self.pattern = (v, w);
        } else if let Some(&(_, fl, fa)) = SPEED_BINDINGS.iter().find(|b| b.0 == key) {
            self.linear *= fl;
            self.angular *= fa;
        }
        self.twist()
    }

    /// Forgets the current direction (e.g. when autonomy takes over).
    pub fn stop(&mut self) {
        self.pattern = (0, 0);
    }
}

impl Default for TeleopState {
    fn default() -> Self {
        Self::new(TeleopConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> TeleopState {
        TeleopState::new(TeleopConfig {
            linear: 1.0,
            angular: 1.0,
            scale_linear: 5.0,
            scale_angular: 5.0,
        })
    }

    #[test]
    fn examples() {
        let mut t = unit();
        assert_eq!(t.apply('i'), Twist2D::new(5.0, 0.0));
        assert_eq!(t.apply('k'), Twist2D::ZERO);
        t.apply('q');
        t.apply('q');
        assert!((t.linear - 1.21).abs() < 1e-12 && (t.angular - 1.21).abs() < 1e-12);
    }

    #[test]
    fn direction_patterns() {
        let mut t = unit();
        let expect = [
            ('u', 5.0, 5.0),
            ('o', 5.0, -5.0),
            ('j', 0.0, 5.0),
            ('l', 0.0, -5.0),
            (',', -5.0, 0.0),
            ('m', -5.0, -5.0),
            ('.', -5.0, 5.0),
            (' ', 0.0, 0.0),
            ('I', 5.0, 0.0),
        ];
        for (k, v, w) in expect {
            assert_eq!(t.apply(k), Twist2D::new(v, w), "key {k:?}");
        }
    }

    #[test]
    fn speed_keys_scale_selectively() {
        let mut t = unit();
        t.apply('i');
        assert_eq!(t.apply('w'), Twist2D::new(5.5, 0.0));
        t.apply('x');
        assert!((t.linear - 0.99).abs() < 1e-12);
        t.apply('e');
        t.apply('c');
        assert!((t.angular - 0.99).abs() < 1e-12);
        assert!((t.linear - 0.99).abs() < 1e-12);
        t.apply('z');
        assert!((t.linear - 0.891).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_change_nothing() {
        let mut t = unit();
        let before = t.apply('u');
        let snapshot = t;
        assert_eq!(t.apply('p'), before);
        assert_eq!(t.apply('7'), before);
        assert_eq!(t, snapshot);
        assert_eq!(classify_key('p'), KeyKind::Unmapped);
        assert_eq!(classify_key('K'), KeyKind::Direction);
        assert_eq!(classify_key('c'), KeyKind::Speed);
    }

    #[test]
    fn emitted_twist_is_bounded() {
        let keys = ['u', 'i', 'q', 'o', 'e', 'w', 'm', 'z', '.', 'x', 'c', ',', 'j', 'l', 'k', 'p'];
        let mut t = TeleopState::default();
        for i in 0..500 {
            let k = keys[(i * 7 + i / 3) % keys.len()];
            let tw = t.apply(k);
            assert!(tw.v.abs() <= t.scale_linear * t.linear + 1e-12);
            assert!(tw.w.abs() <= t.scale_angular * t.angular + 1e-12);
        }
    }

    #[test]
    fn keymap_lists_every_binding() {
        for (k, _, _) in MOVE_BINDINGS.iter().filter(|b| b.0 != ' ') {
            assert!(KEYMAP_TABLE.contains(*k));
        }
        for (k, _, _) in SPEED_BINDINGS {
            assert!(KEYMAP_TABLE.contains(k));
        }
    }
}
