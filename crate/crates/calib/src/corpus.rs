use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use fovnoise::{io, Frame};

/// Stimulus images by id (the file stem).
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    stimuli: BTreeMap<String, Arc<Frame>>,
}

impl Corpus {
    pub fn from_dir(dir: impl AsRef<Path>) -> fovnoise::Result<Self> {
        let mut stimuli = BTreeMap::new();
        for path in io::list_frames(dir)? {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_owned();
            stimuli.insert(id, Arc::new(io::load_frame(&path)?));
        }
        Ok(Self { stimuli })
    }

    pub fn from_frames(frames: impl IntoIterator<Item = (String, Frame)>) -> Self {
        Self {
            stimuli: frames.into_iter().map(|(id, f)| (id, Arc::new(f))).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Arc<Frame>> {
        self.stimuli.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.stimuli.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.stimuli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimuli.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fovnoise::io::BitDepth;
    use fovnoise::scenes;

    #[test]
    fn loads_images_by_stem() {
        let dir = tempfile::tempdir().unwrap();
        for (name, seed) in [("b", 1), ("a", 2)] {
            io::save_frame(dir.path().join(format!("{name}.png")), &scenes::natural_scene(64, 32, seed), BitDepth::Eight)
                .unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let c = Corpus::from_dir(dir.path()).unwrap();
        assert_eq!(c.ids().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(c.get("a").unwrap().dims(), (64, 32));
        assert!(c.get("c").is_none());
    }
}
