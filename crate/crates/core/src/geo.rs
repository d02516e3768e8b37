//! Country resolution for free-text profile locations.
//!
//! Resolution order: embedded coordinates against country bounding boxes,
//! then the offline gazetteer (full string, then comma-separated suffixes),
//! then an optional external geocoder behind a persistent cache. Anything
//! left over is unresolved, and the geo stage drops unresolved tweets.

use std::collections::{HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::{Evidence, ReasonCode, StageDecision, StageId};

pub const DEFAULT_GAZETTEER: &str = include_str!("../data/gazetteer.csv");
pub const DEFAULT_BBOXES: &str = include_str!("../data/us_bboxes.csv");

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad CSV in {what}: {source}")]
    Csv {
        what: String,
        #[source]
        source: csv::Error,
    },
    #[error("bounding box row {row}: {reason}")]
    BadBox { row: usize, reason: String },
    #[error("geocoder request failed: {0}")]
    Request(String),
    #[error("geocoder response unreadable: {0}")]
    Response(String),
}

/// Lowercases, trims, collapses whitespace and normalizes comma spacing.
pub fn normalize_place(s: &str) -> String {
    s.split(',')
        .map(|seg| seg.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .filter(|seg| !seg.is_empty())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Offline place-name to country-code table.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    names: HashMap<String, String>,
}

#[derive(Deserialize)]
struct GazetteerRow {
    name: String,
    country_code: String,
}

impl Gazetteer {
    /// Reads `name,country_code` CSV with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, csv::Error> {
        let mut g = Gazetteer::default();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for row in rdr.deserialize::<GazetteerRow>() {
            let row = row?;
            g.insert(&row.name, &row.country_code);
        }
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeoError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| GeoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(file).map_err(|source| GeoError::Csv {
            what: path.display().to_string(),
            source,
        })
    }

    pub fn builtin() -> Self {
        Self::from_csv(DEFAULT_GAZETTEER.as_bytes()).expect("shipped gazetteer")
    }

    pub fn insert(&mut self, name: &str, country: &str) {
        let key = normalize_place(name);
        if !key.is_empty() {
            self.names.insert(key, country.trim().to_uppercase());
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Exact lookup of the whole normalized string.
    pub fn get(&self, name: &str) -> Option<&str> {
        self.names.get(&normalize_place(name)).map(String::as_str)
    }

    /// Looks up the full string, then each comma-separated suffix:
    /// "Brooklyn, NY, USA" tries "brooklyn, ny, usa", "ny, usa", "usa".
    pub fn lookup(&self, location: &str) -> Option<&str> {
        let norm = normalize_place(location);
        let segments: Vec<&str> = norm.split(", ").collect();
        (0..segments.len()).find_map(|k| self.names.get(&segments[k..].join(", ")).map(String::as_str))
    }
}

/// Latitude/longitude rectangle for one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub country_code: String,
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }
}

pub fn parse_bboxes<R: Read>(reader: R) -> Result<Vec<BoundingBox>, GeoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<BoundingBox>().enumerate() {
        let mut b = row.map_err(|source| GeoError::Csv {
            what: "bounding boxes".into(),
            source,
        })?;
        if b.min_lat > b.max_lat || b.min_lon > b.max_lon {
            return Err(GeoError::BadBox {
                row: i + 1,
                reason: "min exceeds max".into(),
            });
        }
        b.country_code = b.country_code.to_uppercase();
        out.push(b);
    }
    Ok(out)
}

pub fn load_bboxes(path: impl AsRef<Path>) -> Result<Vec<BoundingBox>, GeoError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| GeoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_bboxes(file)
}

/// Continental US, Alaska and Hawaii.
pub fn builtin_bboxes() -> Vec<BoundingBox> {
    parse_bboxes(DEFAULT_BBOXES.as_bytes()).expect("shipped bounding boxes")
}

/// Extracts `lat,lon` from strings such as `ÜT: -7.272681,112.755908`,
/// `iPhone: 40.7,-74.0` or a bare `40.7, -74.0`.
pub fn parse_coordinates(location: &str) -> Option<(f64, f64)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(
            r"(?i)^\s*(?:(?:ÜT|UT|\\u00dcT|iPhone|Pre)\s*:\s*)?([-+]?\d{1,3}(?:\.\d+)?)\s*,\s*([-+]?\d{1,3}(?:\.\d+)?)\s*$",
        )
        .unwrap()
    });
    let caps = re.captures(location)?;
    let lat: f64 = caps[1].parse().ok()?;
    let lon: f64 = caps[2].parse().ok()?;
    ((-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)).then_some((lat, lon))
}

/// External place-name lookup.
pub trait Geocoder: Send + Sync {
    /// Country code for `query`, `None` when the service knows no country.
    fn geocode(&self, query: &str) -> Result<Option<String>, GeoError>;
}

/// Geocoder over HTTP: `GET {endpoint}?q={query}` answering
/// `{"country": "US"}` or `{"country": null}`.
pub struct HttpGeocoder {
    endpoint: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct GeocodeResponse {
    country: Option<String>,
}

impl HttpGeocoder {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpGeocoder {
            endpoint: endpoint.into(),
            agent,
        }
    }
}

impl Geocoder for HttpGeocoder {
    fn geocode(&self, query: &str) -> Result<Option<String>, GeoError> {
        let mut resp = self
            .agent
            .get(&self.endpoint)
            .query("q", query)
            .call()
            .map_err(|e| GeoError::Request(e.to_string()))?;
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| GeoError::Response(e.to_string()))?;
        let parsed: GeocodeResponse =
            serde_json::from_str(&body).map_err(|e| GeoError::Response(e.to_string()))?;
        Ok(parsed
            .country
            .map(|c| c.trim().to_uppercase())
            .filter(|c| !c.is_empty()))
    }
}

#[derive(Default)]
struct CacheState {
    answers: HashMap<String, Option<String>>,
    failed: HashSet<String>,
}

/// Wraps a geocoder with an in-memory map and an optional on-disk CSV
/// cache (`query,country`, empty country for "no answer").
///
/// Lookups are serialized: each distinct query reaches the inner geocoder
/// at most once per run, failures included.
pub struct CachedGeocoder<G> {
    inner: G,
    state: Mutex<CacheState>,
    cache_file: Option<PathBuf>,
    requests: AtomicUsize,
}

impl<G: Geocoder> CachedGeocoder<G> {
    pub fn new(inner: G) -> Self {
        CachedGeocoder {
            inner,
            state: Mutex::new(CacheState::default()),
            cache_file: None,
            requests: AtomicUsize::new(0),
        }
    }

    /// Uses `path` as the persistent cache, loading it when it exists.
    pub fn with_cache_file(inner: G, path: impl Into<PathBuf>) -> Result<Self, GeoError> {
        let path = path.into();
        let mut state = CacheState::default();
        if path.exists() {
            let mut rdr = csv::Reader::from_path(&path).map_err(|source| GeoError::Csv {
                what: path.display().to_string(),
                source,
            })?;
            for rec in rdr.records() {
                let rec = rec.map_err(|source| GeoError::Csv {
                    what: path.display().to_string(),
                    source,
                })?;
                let query = rec.get(0).unwrap_or_default().to_string();
                let country = rec.get(1).map(str::trim).filter(|c| !c.is_empty()).map(String::from);
                state.answers.insert(query, country);
            }
        }
        Ok(CachedGeocoder {
            inner,
            state: Mutex::new(state),
            cache_file: Some(path),
            requests: AtomicUsize::new(0),
        })
    }

    /// Requests sent to the inner geocoder so far.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn persist(&self, query: &str, country: Option<&str>) -> Result<(), GeoError> {
        let Some(path) = &self.cache_file else {
            return Ok(());
        };
        let io_err = |source| GeoError::Io {
            path: path.clone(),
            source,
        };
        let fresh = !path.exists();
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |source| GeoError::Csv {
            what: path.display().to_string(),
            source,
        };
        if fresh {
            w.write_record(["query", "country"]).map_err(csv_err)?;
        }
        w.write_record([query, country.unwrap_or("")]).map_err(csv_err)?;
        w.flush().map_err(io_err)
    }
}

impl<G: Geocoder> Geocoder for CachedGeocoder<G> {
    fn geocode(&self, query: &str) -> Result<Option<String>, GeoError> {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(answer) = state.answers.get(query) {
            return Ok(answer.clone());
        }
        if state.failed.contains(query) {
            return Err(GeoError::Request(format!("earlier lookup of {query:?} failed")));
        }
        self.requests.fetch_add(1, Ordering::Relaxed);
        match self.inner.geocode(query) {
            Ok(answer) => {
                state.answers.insert(query.to_string(), answer.clone());
                if let Err(e) = self.persist(query, answer.as_deref()) {
                    log::warn!("geocoder cache not written: {e}");
                }
                Ok(answer)
            }
            Err(e) => {
                state.failed.insert(query.to_string());
                Err(e)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeoMethod {
    Coordinates,
    Gazetteer,
    External,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeoResolution {
    pub country: Option<String>,
    pub method: GeoMethod,
    pub raw: String,
}

impl GeoResolution {
    fn unresolved(raw: &str) -> Self {
        GeoResolution {
            country: None,
            method: GeoMethod::Unresolved,
            raw: raw.to_string(),
        }
    }

    fn resolved(raw: &str, country: &str, method: GeoMethod) -> Self {
        GeoResolution {
            country: Some(country.to_string()),
            method,
            raw: raw.to_string(),
        }
    }
}

pub fn resolve_country(
    location: &str,
    gazetteer: &Gazetteer,
    bboxes: &[BoundingBox],
    external: Option<&dyn Geocoder>,
) -> GeoResolution {
    if location.trim().is_empty() {
        return GeoResolution::unresolved(location);
    }
    let coords = parse_coordinates(location);
    if let Some((lat, lon)) = coords {
        if let Some(b) = bboxes.iter().find(|b| b.contains(lat, lon)) {
            return GeoResolution::resolved(location, &b.country_code, GeoMethod::Coordinates);
        }
    } else if let Some(country) = gazetteer.lookup(location) {
        return GeoResolution::resolved(location, country, GeoMethod::Gazetteer);
    }
    if let Some(client) = external {
        match client.geocode(location.trim()) {
            Ok(Some(country)) => return GeoResolution::resolved(location, &country, GeoMethod::External),
            Ok(None) => {}
            Err(e) => log::warn!("geocoding {location:?} failed: {e}"),
        }
    }
    GeoResolution::unresolved(location)
}

/// Gazetteer, bounding boxes and optional external client bundled together.
pub struct GeoResolver {
    pub gazetteer: Gazetteer,
    pub bboxes: Vec<BoundingBox>,
    pub external: Option<Box<dyn Geocoder>>,
}

impl GeoResolver {
    pub fn builtin() -> Self {
        GeoResolver {
            gazetteer: Gazetteer::builtin(),
            bboxes: builtin_bboxes(),
            external: None,
        }
    }

    pub fn resolve(&self, location: &str) -> GeoResolution {
        resolve_country(location, &self.gazetteer, &self.bboxes, self.external.as_deref())
    }
}

impl std::fmt::Debug for GeoResolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeoResolver")
            .field("gazetteer_entries", &self.gazetteer.len())
            .field("bboxes", &self.bboxes.len())
            .field("external", &self.external.is_some())
            .finish()
    }
}

/// Keeps the tweet iff its profile location resolves to `target`.
pub fn geo_stage(location: Option<&str>, target: &str, resolver: &GeoResolver) -> StageDecision {
    let res = resolver.resolve(location.unwrap_or(""));
    match &res.country {
        Some(c) if c.eq_ignore_ascii_case(target) => StageDecision::keep(StageId::Geo),
        Some(c) => StageDecision::from_evidence(
            StageId::Geo,
            vec![Evidence::new(ReasonCode::ForeignLocation, None).with_note(c.clone())],
        ),
        None => StageDecision::from_evidence(
            StageId::Geo,
            vec![Evidence::new(ReasonCode::UnresolvedLocation, None).with_note(res.raw)],
        ),
    }
}
