//! Map image + metadata files: a binary P5 PGM (row 0 is the top, i.e. the
//! highest-y cell row) and a six-key YAML sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::grid::{CellClass, OccupancyGrid};

pub const PIXEL_OCCUPIED: u8 = 0;
pub const PIXEL_FREE: u8 = 254;
pub const PIXEL_UNKNOWN: u8 = 205;

const YAML_KEYS: [&str; 6] = ["image", "resolution", "origin", "negate", "occupied_thresh", "free_thresh"];

fn with_ext(basename: &Path, ext: &str) -> PathBuf {
    let mut s = basename.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Formats with `decimals` digits, never printing a negative zero.
fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// YAML metadata for `grid` whose image is stored at `image`.
pub fn yaml_text(grid: &OccupancyGrid, image: &str) -> String {
    let o = grid.origin();
    format!(
        "image: {image}\nresolution: {}\norigin: [{}, {}, {}]\nnegate: 0\noccupied_thresh: {}\nfree_thresh: {}\n",
        fixed(grid.resolution(), 6),
        fixed(o.x, 6),
        fixed(o.y, 6),
        fixed(o.theta, 6),
        grid.occupied_thresh(),
        grid.free_thresh(),
    )
}

pub fn pgm_bytes(grid: &OccupancyGrid) -> Vec<u8> {
    let (w, h) = (grid.width(), grid.height());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for row in 0..h {
        let iy = h - 1 - row;
        for ix in 0..w {
            out.push(match grid.class_at(ix, iy) {
                CellClass::Occupied => PIXEL_OCCUPIED,
                CellClass::Free => PIXEL_FREE,
                CellClass::Unknown => PIXEL_UNKNOWN,
            });
        }
    }
    out
}

/// Writes `<basename>.pgm` and `<basename>.yaml`.
pub fn save_map(grid: &OccupancyGrid, basename: impl AsRef<Path>) -> Result<()> {
    let basename = basename.as_ref();
    let pgm = with_ext(basename, "pgm");
    let yaml = with_ext(basename, "yaml");
    let image_name = pgm
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Usage(format!("invalid map basename {}", basename.display())))?;
    fs::write(&pgm, pgm_bytes(grid)).map_err(|e| Error::io(&pgm, e))?;
    fs::write(&yaml, yaml_text(grid, &image_name)).map_err(|e| Error::io(&yaml, e))?;
    Ok(())
}

#[derive(Debug)]
struct MapMeta {
    image: PathBuf,
    resolution: f64,
    origin: Pose2D,
    negate: bool,
    occupied_thresh: f64,
    free_thresh: f64,
}

fn parse_yaml(path: &Path, text: &str) -> Result<MapMeta> {
    let bad = |reason: String| Error::YamlFormat {
        path: path.to_path_buf(),
        reason,
    };
    let doc: serde_yaml::Mapping = serde_yaml::from_str(text).map_err(|e| bad(e.to_string()))?;
    for key in doc.keys() {
        let name = key.as_str().ok_or_else(|| bad("non-string key".into()))?;
        if !YAML_KEYS.contains(&name) {
            return Err(Error::UnknownYamlKey {
                path: path.to_path_buf(),
                key: name.to_string(),
            });
        }
    }
    let num = |key: &str| -> Result<Option<f64>> {
        match doc.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| bad(format!("`{key}` must be a number"))),
        }
    };
    let image = match doc.get("image") {
        Some(serde_yaml::Value::String(s)) => PathBuf::from(s.trim()),
        Some(_) => return Err(bad("`image` must be a string".into())),
        None => return Err(bad("missing `image`".into())),
    };
    let resolution = num("resolution")?.ok_or_else(|| bad("missing `resolution`".into()))?;
    let origin = match doc.get("origin") {
        Some(serde_yaml::Value::Sequence(seq)) if seq.len() == 3 => {
            let v: Vec<f64> = seq
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| bad("`origin` entries must be numbers".into())))
                .collect::<Result<_>>()?;
            Pose2D {
                x: v[0],
                y: v[1],
                theta: v[2],
            }
        }
        Some(_) => return Err(bad("`origin` must be a 3-element list".into())),
        None => return Err(bad("missing `origin`".into())),
    };
    let negate = match doc.get("negate") {
        None => false,
        Some(v) => match v.as_i64() {
            Some(0) => false,
            Some(1) => true,
            _ => return Err(bad("`negate` must be 0 or 1".into())),
        },
    };
    Ok(MapMeta {
        image,
        resolution,
        origin,
        negate,
        occupied_thresh: num("occupied_thresh")?.unwrap_or(crate::grid::DEFAULT_OCCUPIED_THRESH),
        free_thresh: num("free_thresh")?.unwrap_or(crate::grid::DEFAULT_FREE_THRESH),
    })
}

struct Pgm {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<Pgm> {
    let bad = |reason: &str| Error::PgmFormat {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0usize;
    // header tokens, skipping whitespace and `#` comments
    let token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    if token(&mut pos).as_deref() != Some("P5") {
        return Err(bad("expected binary P5 magic"));
    }
    let mut number = |what: &str| -> Result<usize> {
        token(&mut pos)
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| bad(&format!("bad {what} in header")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(bad(&format!("maxval must be 255, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(bad("zero image dimension"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing raster"));
    }
    pos += 1;
    let need = width * height;
    if bytes.len() - pos != need {
        return Err(bad(&format!("raster has {} bytes, expected {need}", bytes.len() - pos)));
    }
    Ok(Pgm {
        width,
        height,
        pixels: bytes[pos..].to_vec(),
    })
}

/// Reads a map from `<basename>.yaml` (a path already ending in `.yaml` is
/// used as is) and the image it names, resolved relative to the YAML file.
pub fn load_map(basename: impl AsRef<Path>) -> Result<OccupancyGrid> {
    let basename = basename.as_ref();
    let yaml_path = if basename.extension().is_some_and(|e| e == "yaml" || e == "yml") {
        basename.to_path_buf()
    } else {
        with_ext(basename, "yaml")
    };
    let text = fs::read_to_string(&yaml_path).map_err(|e| Error::io(&yaml_path, e))?;
    let meta = parse_yaml(&yaml_path, &text)?;

    let image_path = if meta.image.is_absolute() {
        meta.image.clone()
    } else {
        yaml_path.parent().unwrap_or(Path::new("")).join(&meta.image)
    };
    let bytes = fs::read(&image_path).map_err(|e| Error::io(&image_path, e))?;
    let pgm = parse_pgm(&image_path, &bytes)?;

    if meta.origin.theta != 0.0 {
        return Err(Error::RotatedOrigin(meta.origin.theta));
    }
    let mut grid = OccupancyGrid::new(pgm.width, pgm.height, meta.resolution, meta.origin)?;
    grid.set_thresholds(meta.occupied_thresh, meta.free_thresh)?;
    for row in 0..pgm.height {
        let iy = pgm.height - 1 - row;
        for ix in 0..pgm.width {
            let px = pgm.pixels[row * pgm.width + ix] as f64;
            let p = if meta.negate { px / 255.0 } else { (255.0 - px) / 255.0 };
            let class = if p > meta.occupied_thresh {
                CellClass::Occupied
            } else if p < meta.free_thresh {
                CellClass::Free
            } else {
                CellClass::Unknown
            };
            let idx = grid.index(ix, iy);
            grid.set_class(idx, class);
        }
    }
    Ok(grid)
}
