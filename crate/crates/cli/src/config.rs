use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cityscale_core::{CountryCode, DatasetTag, InputFormat};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSource {
    pub path: PathBuf,
    pub format: InputFormat,
    pub dataset_tag: DatasetTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub event_sources: Vec<EventSource>,
    pub country_layer_path: PathBuf,
    pub city_layer_paths: Vec<PathBuf>,
    #[serde(default = "default_target")]
    pub target_country: CountryCode,
    #[serde(default = "default_min_events")]
    pub min_events: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    pub output_dir: PathBuf,
}

fn default_target() -> CountryCode {
    "ES".parse().unwrap()
}

fn default_min_events() -> u64 {
    1
}

fn default_bins() -> usize {
    cityscale_core::scaling::DEFAULT_BINS
}

impl PipelineConfig {
    /// Reads a config file. Relative paths inside it are resolved against
    /// the directory holding the file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.event_sources {
            fix(&mut s.path);
        }
        fix(&mut self.country_layer_path);
        self.city_layer_paths.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.event_sources.is_empty() {
            bail!("event_sources is empty");
        }
        if self.city_layer_paths.is_empty() {
            bail!("city_layer_paths is empty");
        }
        let empty = |p: &Path| p.as_os_str().is_empty();
        if self.event_sources.iter().any(|s| empty(&s.path))
            || empty(&self.country_layer_path)
            || self.city_layer_paths.iter().any(|p| empty(p))
            || empty(&self.output_dir)
        {
            bail!("paths must be nonempty");
        }
        if self.bins < 1 {
            bail!("bins must be at least 1");
        }
        Ok(())
    }

    /// Every input file the run reads.
    pub fn inputs(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = self.event_sources.iter().map(|s| s.path.as_path()).collect();
        v.push(&self.country_layer_path);
        v.extend(self.city_layer_paths.iter().map(PathBuf::as_path));
        v
    }
}
