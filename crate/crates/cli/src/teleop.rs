//! Keyboard teleop client. Keys go to the bridge one at a time; a local
//! [`TeleopState`] mirrors the stack's so current speeds can be printed.

use std::io::{IsTerminal, Read, Write};
use std::process::Command as Process;

use diffnav_core::bridge::Command;
use diffnav_core::teleop::{classify_key, KeyKind, TeleopConfig, TeleopState, KEYMAP_TABLE};

use crate::client::BridgeClient;

/// Puts the terminal in single-key mode for its lifetime.
struct RawTerminal {
    saved: Option<String>,
}

impl RawTerminal {
    fn enter() -> Self {
        if !std::io::stdin().is_terminal() {
            return Self { saved: None };
        }
        let saved = Process::new("stty")
            .arg("-g")
            .stdin(std::process::Stdio::inherit())
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string());
        if saved.is_some() {
            let _ = Process::new("stty").args(["-icanon", "-echo", "min", "1"]).status();
        }
        Self { saved }
    }
}

impl Drop for RawTerminal {
    fn drop(&mut self) {
        if let Some(s) = &self.saved {
            let _ = Process::new("stty").arg(s).status();
        }
    }
}

/// Reads keys from `input` until EOF, `Ctrl-C` or `Ctrl-D`, forwarding each
/// known key. Sends a stop before returning.
pub fn run_teleop(client: &mut BridgeClient, input: &mut dyn Read, out: &mut dyn Write, cfg: TeleopConfig) -> anyhow::Result<()> {
    writeln!(out, "{KEYMAP_TABLE}")?;
    let mut local = TeleopState::new(cfg);
    let mut buf = [0u8; 1];
    loop {
        if input.read(&mut buf)? == 0 {
            break;
        }
        let key = buf[0] as char;
        if key == '\u{3}' || key == '\u{4}' {
            break;
        }
        let kind = classify_key(key);
        if kind == KeyKind::Unmapped {
            continue;
        }
        let ack = client.request(&Command::TeleopKey(key))?;
        if !ack.accepted {
            writeln!(out, "rejected: {}", ack.reason.unwrap_or_default())?;
            continue;
        }
        local.apply(key);
        if kind == KeyKind::Speed {
            writeln!(out, "currently:\tspeed {:.4}\tturn {:.4}", local.linear, local.angular)?;
        }
    }
    client.request(&Command::TeleopKey(' '))?;
    Ok(())
}

pub fn run_interactive(url: &str, cfg: TeleopConfig) -> anyhow::Result<()> {
    let mut client = BridgeClient::connect(url)?;
    let _raw = RawTerminal::enter();
    let stdin = std::io::stdin();
    let result = run_teleop(&mut client, &mut stdin.lock(), &mut std::io::stdout(), cfg);
    client.close();
    result
}
