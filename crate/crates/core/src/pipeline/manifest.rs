use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::hull::View;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Background {
    Shared(PathBuf),
    PerView { view0: PathBuf, view90: PathBuf },
}

impl Background {
    pub fn for_view(&self, v: View) -> &Path {
        match (self, v) {
            (Background::Shared(p), _) => p,
            (Background::PerView { view0, .. }, View::View0) => view0,
            (Background::PerView { view90, .. }, View::View90) => view90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub plant_id: String,
    /// Calendar day, counted from 1.
    pub day: u32,
    pub view: View,
    pub image: PathBuf,
}

/// A `(plant, day, view)` key.
pub type Slot = (String, u32, View);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Base for relative paths; itself relative to the manifest file.
    #[serde(default)]
    pub root: PathBuf,
    pub background: Background,
    pub entries: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    /// Slots of the full plant × day × view grid with no image.
    #[serde(skip)]
    pub missing: Vec<Slot>,
}

/// Reads and validates a JSON manifest: unique `(plant, day, view)` keys
/// and existing files.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let mut m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    m.root = base.join(&m.root);
    m.validate()?;
    Ok(m)
}

impl Manifest {
    pub fn new(root: PathBuf, background: Background, entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut m = Manifest {
            root,
            background,
            entries,
            ground_truth: None,
            missing: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    fn validate(&mut self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.day == 0 {
                return Err(Error::Manifest(format!("plant {}: days are counted from 1", e.plant_id)));
            }
            if !seen.insert((e.plant_id.clone(), e.day, e.view)) {
                return Err(Error::Manifest(format!(
                    "duplicate entry: plant {} day {} view {}",
                    e.plant_id, e.day, e.view
                )));
            }
        }
        let mut files: Vec<&Path> = self.entries.iter().map(|e| e.image.as_path()).collect();
        match &self.background {
            Background::Shared(p) => files.push(p),
            Background::PerView { view0, view90 } => files.extend([view0.as_path(), view90.as_path()]),
        }
        files.extend(self.ground_truth.as_deref());
        for f in files {
            let full = self.resolve(f);
            if !full.is_file() {
                return Err(Error::Manifest(format!("referenced file does not exist: {}", full.display())));
            }
        }
        self.missing = missing_slots(&self.entries);
        Ok(())
    }

    pub fn plants(&self) -> BTreeSet<String> {
        self.entries.iter().map(|e| e.plant_id.clone()).collect()
    }

    /// `day -> view -> entry` for one plant.
    pub fn plant_days(&self, plant: &str) -> BTreeMap<u32, BTreeMap<View, &ManifestEntry>> {
        let mut out: BTreeMap<u32, BTreeMap<View, &ManifestEntry>> = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.plant_id == plant) {
            out.entry(e.day).or_default().insert(e.view, e);
        }
        out
    }

    pub fn load_ground_truth(&self) -> Result<Option<BTreeMap<(String, u32), GroundTruth>>> {
        let Some(p) = &self.ground_truth else { return Ok(None) };
        load_ground_truth(self.resolve(p)).map(Some)
    }
}

/// Slots missing from the grid spanned by all plants, the global day range
/// and both views.
fn missing_slots(entries: &[ManifestEntry]) -> Vec<Slot> {
    let present: BTreeSet<Slot> = entries.iter().map(|e| (e.plant_id.clone(), e.day, e.view)).collect();
    let plants: BTreeSet<&str> = entries.iter().map(|e| e.plant_id.as_str()).collect();
    let (Some(lo), Some(hi)) = (entries.iter().map(|e| e.day).min(), entries.iter().map(|e| e.day).max()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for p in plants {
        for d in lo..=hi {
            for v in [View::View0, View::View90] {
                let slot = (p.to_string(), d, v);
                if !present.contains(&slot) {
                    out.push(slot);
                }
            }
        }
    }
    out
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<BTreeMap<(String, u32), GroundTruth>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let list: Vec<GroundTruth> =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for g in list {
        let key = (g.plant_id.clone(), g.day);
        if out.insert(key, g).is_some() {
            return Err(Error::Manifest(format!("{}: duplicate ground-truth day", path.display())));
        }
    }
    Ok(out)
}

/// Default layout understood by [`scan_layout`].
pub const DEFAULT_PATTERN: &str = "{plant}/day_{day}/view_{view}.png";

/// Builds a manifest from the files under `root` whose relative paths match
/// `pattern`, where `{plant}`, `{day}` and `{view}` stand for a plant id
/// (no `/`), a day number and `0` or `90`.
pub fn scan_layout(root: &Path, pattern: &str, background: Background) -> Result<Manifest> {
    let mut re = String::from("^");
    let mut rest = pattern;
    while let Some(start) = rest.find('{') {
        re.push_str(&regex::escape(&rest[..start]));
        let end = rest[start..]
            .find('}')
            .ok_or_else(|| Error::invalid(format!("unclosed placeholder in pattern {pattern:?}")))?;
        re.push_str(match &rest[start + 1..start + end] {
            "plant" => "(?P<plant>[^/]+?)",
            "day" => "(?P<day>[0-9]+)",
            "view" => "(?P<view>0|90)",
            other => return Err(Error::invalid(format!("unknown placeholder {{{other}}}"))),
        });
        rest = &rest[start + end + 1..];
    }
    re.push_str(&regex::escape(rest));
    re.push('$');
    let re = regex::Regex::new(&re).map_err(|e| Error::invalid(e.to_string()))?;
    for name in ["plant", "day", "view"] {
        if !pattern.contains(&format!("{{{name}}}")) {
            return Err(Error::invalid(format!("pattern must contain {{{name}}}")));
        }
    }

    let mut entries = Vec::new();
    for item in walkdir::WalkDir::new(root).sort_by_file_name() {
        let item = item.map_err(|e| Error::invalid(e.to_string()))?;
        if !item.file_type().is_file() {
            continue;
        }
        let rel = item.path().strip_prefix(root).expect("walk stays under root");
        let rel_str = rel.to_string_lossy().replace('\\', "/");
        let Some(c) = re.captures(&rel_str) else { continue };
        let view = match &c["view"] {
            "0" => View::View0,
            _ => View::View90,
        };
        entries.push(ManifestEntry {
            plant_id: c["plant"].to_string(),
            day: c["day"].parse().map_err(|_| Error::invalid(format!("bad day in {rel_str}")))?,
            view,
            image: rel.to_path_buf(),
        });
    }
    entries.sort_by(|a, b| (&a.plant_id, a.day, a.view).cmp(&(&b.plant_id, b.day, b.view)));
    Manifest::new(root.to_path_buf(), background, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_grid() {
        let e = |p: &str, d: u32, v: View| ManifestEntry {
            plant_id: p.into(),
            day: d,
            view: v,
            image: PathBuf::new(),
        };
        let entries = vec![e("a", 1, View::View0), e("a", 2, View::View0), e("a", 2, View::View90)];
        assert_eq!(missing_slots(&entries), vec![("a".to_string(), 1, View::View90)]);
    }
}
