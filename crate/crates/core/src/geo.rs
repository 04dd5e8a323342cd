//! Region layers loaded from GeoJSON and planar point-in-polygon assignment.
//!
//! Coordinates are kept as `(lat, lon)` degree pairs internally; GeoJSON's
//! `[lon, lat]` order is swapped on load. Containment uses even-odd ray
//! casting on the raw degree plane. Points on an edge count as inside.

use std::collections::HashSet;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::Value;

use crate::event::EventRecord;

#[derive(Debug, thiserror::Error)]
pub enum GeoError {
    #[error("invalid GeoJSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected a FeatureCollection, found {0:?}")]
    NotFeatureCollection(String),
    #[error("duplicate region id {0:?}")]
    DuplicateId(String),
    #[error("feature {id:?}: unsupported geometry type {kind:?}")]
    UnsupportedGeometry { id: String, kind: String },
    #[error("feature {id:?}: ring with fewer than 3 distinct vertices")]
    DegenerateRing { id: String },
    #[error("feature {index}: {message}")]
    BadFeature { index: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: LatLon,
    pub max: LatLon,
}

impl BBox {
    fn of<'a>(points: impl IntoIterator<Item = &'a LatLon>) -> Option<BBox> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut bbox = BBox { min: first, max: first };
        for p in iter {
            bbox.min.lat = bbox.min.lat.min(p.lat);
            bbox.min.lon = bbox.min.lon.min(p.lon);
            bbox.max.lat = bbox.max.lat.max(p.lat);
            bbox.max.lon = bbox.max.lon.max(p.lon);
        }
        Some(bbox)
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.min.lat && lat <= self.max.lat && lon >= self.min.lon && lon <= self.max.lon
    }
}

/// A closed ring stored without the repeated closing vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Ring(Vec<LatLon>);

impl Ring {
    /// Builds a ring, dropping a trailing vertex equal to the first.
    /// Returns `None` when fewer than 3 distinct vertices remain.
    pub fn new(mut vertices: Vec<LatLon>) -> Option<Ring> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let distinct: HashSet<(u64, u64)> =
            vertices.iter().map(|v| (v.lat.to_bits(), v.lon.to_bits())).collect();
        (distinct.len() >= 3).then_some(Ring(vertices))
    }

    pub fn vertices(&self) -> &[LatLon] {
        &self.0
    }

    fn edges(&self) -> impl Iterator<Item = (LatLon, LatLon)> + '_ {
        let n = self.0.len();
        (0..n).map(move |i| (self.0[i], self.0[(i + 1) % n]))
    }

    /// Classify a point against this ring.
    ///
    /// The ray runs from the point towards increasing latitude along its
    /// meridian. Vertices lying exactly on that meridian are treated as if
    /// the ray were shifted by an infinitesimal positive longitude offset,
    /// which is the half-open `(a.lon > lon) != (b.lon > lon)` test below.
    pub fn locate(&self, lat: f64, lon: f64) -> Location {
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(lat, lon, a, b) {
                return Location::Boundary;
            }
            if (a.lon > lon) != (b.lon > lon) {
                let t = (lon - a.lon) / (b.lon - a.lon);
                let cross_lat = a.lat + t * (b.lat - a.lat);
                if cross_lat > lat {
                    inside = !inside;
                }
            }
        }
        if inside {
            Location::Inside
        } else {
            Location::Outside
        }
    }
}

fn on_segment(lat: f64, lon: f64, a: LatLon, b: LatLon) -> bool {
    let cross = (b.lat - a.lat) * (lon - a.lon) - (b.lon - a.lon) * (lat - a.lat);
    cross == 0.0
        && lat >= a.lat.min(b.lat)
        && lat <= a.lat.max(b.lat)
        && lon >= a.lon.min(b.lon)
        && lon <= a.lon.max(b.lon)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub outer: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        self.outer.locate(lat, lon) != Location::Outside
            && self.holes.iter().all(|h| h.locate(lat, lon) != Location::Inside)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub id: String,
    pub name: String,
    pub layer: String,
    /// Resident population in persons; at least 1 when present.
    pub population: Option<u64>,
    pub polygons: Vec<Polygon>,
    pub bbox: BBox,
}

impl Region {
    /// Returns `None` if `polygons` is empty.
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        layer: impl Into<String>,
        population: Option<u64>,
        polygons: Vec<Polygon>,
    ) -> Option<Region> {
        let bbox = BBox::of(polygons.iter().flat_map(|p| {
            std::iter::once(&p.outer)
                .chain(&p.holes)
                .flat_map(|r| r.vertices())
        }))?;
        Some(Region {
            id: id.into(),
            name: name.into(),
            layer: layer.into(),
            population: population.filter(|&p| p >= 1),
            polygons,
            bbox,
        })
    }

    /// Axis-aligned rectangle with corners `(lat0, lon0)` and `(lat1, lon1)`.
    pub fn rectangle(
        id: impl Into<String>,
        layer: impl Into<String>,
        population: Option<u64>,
        (lat0, lon0): (f64, f64),
        (lat1, lon1): (f64, f64),
    ) -> Region {
        let ring = Ring::new(vec![
            LatLon::new(lat0, lon0),
            LatLon::new(lat0, lon1),
            LatLon::new(lat1, lon1),
            LatLon::new(lat1, lon0),
        ])
        .expect("rectangle with zero extent");
        let id = id.into();
        Region::new(id.clone(), id, layer, population, vec![Polygon { outer: ring, holes: vec![] }])
            .expect("one polygon")
    }
}

/// True iff the point is inside any polygon of the region (edges inclusive).
pub fn point_in_region(lat: f64, lon: f64, region: &Region) -> bool {
    region.bbox.contains(lat, lon) && point_in_polygons(lat, lon, &region.polygons)
}

/// Same test as [`point_in_region`] without the bounding-box shortcut.
pub fn point_in_polygons(lat: f64, lon: f64, polygons: &[Polygon]) -> bool {
    polygons.iter().any(|p| p.contains(lat, lon))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionLayer {
    pub label: String,
    pub regions: Vec<Region>,
}

impl RegionLayer {
    /// Fails on duplicate region ids.
    pub fn new(label: impl Into<String>, regions: Vec<Region>) -> Result<RegionLayer, GeoError> {
        let mut seen = HashSet::new();
        for r in &regions {
            if !seen.insert(r.id.as_str()) {
                return Err(GeoError::DuplicateId(r.id.clone()));
            }
        }
        Ok(RegionLayer { label: label.into(), regions })
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }

    /// Index of the first region in layer order containing the point, and
    /// whether any later region also contains it.
    pub fn locate(&self, lat: f64, lon: f64) -> (Option<usize>, bool) {
        let mut hits = self
            .regions
            .iter()
            .enumerate()
            .filter(|(_, r)| point_in_region(lat, lon, r))
            .map(|(i, _)| i);
        let first = hits.next();
        (first, first.is_some() && hits.next().is_some())
    }

    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .regions
            .iter()
            .map(|r| {
                let ring_coords = |ring: &Ring| {
                    let mut pts: Vec<Value> = ring
                        .vertices()
                        .iter()
                        .map(|v| serde_json::json!([v.lon, v.lat]))
                        .collect();
                    pts.push(pts[0].clone());
                    Value::Array(pts)
                };
                let polys: Vec<Value> = r
                    .polygons
                    .iter()
                    .map(|p| {
                        Value::Array(
                            std::iter::once(&p.outer)
                                .chain(&p.holes)
                                .map(ring_coords)
                                .collect(),
                        )
                    })
                    .collect();
                let geometry = if polys.len() == 1 {
                    serde_json::json!({"type": "Polygon", "coordinates": polys[0]})
                } else {
                    serde_json::json!({"type": "MultiPolygon", "coordinates": polys})
                };
                let mut props = serde_json::json!({"id": r.id, "name": r.name, "layer": r.layer});
                if let Some(p) = r.population {
                    props["population"] = p.into();
                }
                serde_json::json!({"type": "Feature", "properties": props, "geometry": geometry})
            })
            .collect();
        serde_json::json!({"type": "FeatureCollection", "features": features})
    }
}

#[derive(Deserialize)]
struct RawCollection {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    features: Vec<RawFeature>,
}

#[derive(Deserialize)]
struct RawFeature {
    #[serde(default)]
    properties: serde_json::Map<String, Value>,
    geometry: Option<RawGeometry>,
}

#[derive(Deserialize)]
struct RawGeometry {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    coordinates: Value,
}

/// Load a layer from a GeoJSON FeatureCollection.
///
/// Each feature needs `id`, `name` and `layer` properties and may carry a
/// positive integer `population`. The layer label is taken from the first
/// feature.
pub fn load_layer<R: Read>(source: R) -> Result<RegionLayer, GeoError> {
    let raw: RawCollection = serde_json::from_reader(source)?;
    if raw.kind != "FeatureCollection" {
        return Err(GeoError::NotFeatureCollection(raw.kind));
    }
    let mut regions = Vec::with_capacity(raw.features.len());
    for (index, feature) in raw.features.into_iter().enumerate() {
        regions.push(parse_feature(index, feature)?);
    }
    let label = regions.first().map(|r| r.layer.clone()).unwrap_or_default();
    RegionLayer::new(label, regions)
}

pub fn write_layer_geojson<W: Write>(layer: &RegionLayer, mut out: W) -> Result<(), GeoError> {
    serde_json::to_writer_pretty(&mut out, &layer.to_geojson())?;
    out.write_all(b"\n")?;
    Ok(())
}

fn parse_feature(index: usize, feature: RawFeature) -> Result<Region, GeoError> {
    let bad = |message: String| GeoError::BadFeature { index, message };
    let text = |key: &str| -> Result<String, GeoError> {
        match feature.properties.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(Value::Number(n)) => Ok(n.to_string()),
            _ => Err(bad(format!("missing or non-scalar property {key:?}"))),
        }
    };
    let id = text("id")?;
    let name = text("name")?;
    let layer = text("layer")?;
    let population = match feature.properties.get("population") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0 && *f >= 1.0).map(|f| f as u64))
                .filter(|&p| p >= 1)
                .ok_or_else(|| bad(format!("population must be a positive integer, got {v}")))?,
        ),
    };
    let geometry = feature.geometry.ok_or_else(|| bad("missing geometry".into()))?;
    let polygon_coords: Vec<Value> = match geometry.kind.as_str() {
        "Polygon" => vec![geometry.coordinates],
        "MultiPolygon" => match geometry.coordinates {
            Value::Array(polys) => polys,
            _ => return Err(bad("MultiPolygon coordinates must be an array".into())),
        },
        other => {
            return Err(GeoError::UnsupportedGeometry { id, kind: other.into() });
        }
    };
    let mut polygons = Vec::with_capacity(polygon_coords.len());
    for coords in polygon_coords {
        let rings: Vec<Vec<[f64; 2]>> = serde_json::from_value(coords)
            .map_err(|e| bad(format!("bad polygon coordinates: {e}")))?;
        let mut rings = rings.into_iter().map(|ring| {
            Ring::new(ring.into_iter().map(|[lon, lat]| LatLon::new(lat, lon)).collect())
                .ok_or_else(|| GeoError::DegenerateRing { id: id.clone() })
        });
        let outer = rings
            .next()
            .ok_or_else(|| bad("polygon without rings".into()))??;
        let holes = rings.collect::<Result<Vec<_>, _>>()?;
        polygons.push(Polygon { outer, holes });
    }
    Region::new(id, name, layer, population, polygons).ok_or_else(|| bad("empty MultiPolygon".into()))
}

/// Result of assigning events to the regions of one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    /// Per event, the index into `layer.regions` of its region.
    pub region_of: Vec<Option<usize>>,
    /// Events that fell inside more than one region.
    pub overlaps: usize,
}

impl Assignment {
    pub fn counts(&self, n_regions: usize) -> Vec<u64> {
        let mut counts = vec![0; n_regions];
        for idx in self.region_of.iter().flatten() {
            counts[*idx] += 1;
        }
        counts
    }

    pub fn unassigned(&self) -> usize {
        self.region_of.iter().filter(|r| r.is_none()).count()
    }
}

/// Assign every event to the first region (in layer order) containing it.
pub fn assign_events(events: &[EventRecord], layer: &RegionLayer) -> Assignment {
    let located: Vec<(Option<usize>, bool)> = events
        .par_iter()
        .map(|ev| layer.locate(ev.lat, ev.lon))
        .collect();
    let overlaps = located.iter().filter(|(_, o)| *o).count();
    Assignment {
        region_of: located.into_iter().map(|(r, _)| r).collect(),
        overlaps,
    }
}

/// CSV `event_index,region_id`; unassigned events get an empty region id.
pub fn write_assignment_csv<W: Write>(
    assignment: &Assignment,
    layer: &RegionLayer,
    out: W,
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["event_index", "region_id"])?;
    for (i, region) in assignment.region_of.iter().enumerate() {
        let id = region.map_or("", |r| layer.regions[r].id.as_str());
        writer.write_record([i.to_string().as_str(), id])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::DatasetTag;
    use proptest::prelude::*;

    fn unit_square_json(extra: &str) -> String {
        format!(
            r#"{{"type":"FeatureCollection","features":[
            {{"type":"Feature","properties":{{"id":"A","name":"Alpha","layer":"LUZ","population":1000}},
              "geometry":{{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}}}{extra}]}}"#
        )
    }

    #[test]
    fn loads_unit_square() {
        let layer = load_layer(unit_square_json("").as_bytes()).unwrap();
        assert_eq!(layer.label, "LUZ");
        assert_eq!(layer.regions.len(), 1);
        let r = &layer.regions[0];
        assert_eq!(r.population, Some(1000));
        assert_eq!(r.bbox, BBox { min: LatLon::new(0.0, 0.0), max: LatLon::new(1.0, 1.0) });
        assert_eq!(r.polygons[0].outer.vertices().len(), 4);
    }

    #[test]
    fn coordinate_order_is_swapped() {
        let json = r#"{"type":"FeatureCollection","features":[{"type":"Feature",
            "properties":{"id":"M","name":"Madrid","layer":"CON"},
            "geometry":{"type":"Polygon","coordinates":[[[-4,40],[-3,40],[-3,41],[-4,41]]]}}]}"#;
        let layer = load_layer(json.as_bytes()).unwrap();
        let r = &layer.regions[0];
        assert_eq!(r.population, None);
        assert!(point_in_region(40.4, -3.7, r));
        assert!(!point_in_region(-3.7, 40.4, r));
    }

    #[test]
    fn duplicate_id_rejected() {
        let dup = r#",{"type":"Feature","properties":{"id":"A","name":"Again","layer":"LUZ"},
              "geometry":{"type":"Polygon","coordinates":[[[5,5],[6,5],[6,6],[5,5]]]}}"#;
        let err = load_layer(unit_square_json(dup).as_bytes()).unwrap_err();
        assert!(matches!(err, GeoError::DuplicateId(ref id) if id == "A"));
        assert!(err.to_string().contains("duplicate region id"));
    }

    #[test]
    fn multipolygon_gives_two_outer_rings() {
        let json = r#"{"type":"FeatureCollection","features":[{"type":"Feature",
            "properties":{"id":"B","name":"Islands","layer":"province","population":5},
            "geometry":{"type":"MultiPolygon","coordinates":[
                [[[0,0],[1,0],[1,1],[0,1],[0,0]]],
                [[[3,3],[4,3],[4,4],[3,4],[3,3]]]]}}]}"#;
        let layer = load_layer(json.as_bytes()).unwrap();
        let r = &layer.regions[0];
        assert_eq!(r.polygons.len(), 2);
        assert!(r.polygons.iter().all(|p| p.holes.is_empty()));
        assert!(point_in_region(3.5, 3.5, r));
        assert!(!point_in_region(2.0, 2.0, r));
    }

    #[test]
    fn rejects_bad_geometry() {
        let point = r#"{"type":"FeatureCollection","features":[{"type":"Feature",
            "properties":{"id":"P","name":"P","layer":"x"},
            "geometry":{"type":"Point","coordinates":[0,0]}}]}"#;
        assert!(matches!(
            load_layer(point.as_bytes()),
            Err(GeoError::UnsupportedGeometry { .. })
        ));
        let sliver = r#"{"type":"FeatureCollection","features":[{"type":"Feature",
            "properties":{"id":"S","name":"S","layer":"x"},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,1],[0,0],[1,1]]]}}]}"#;
        assert!(matches!(load_layer(sliver.as_bytes()), Err(GeoError::DegenerateRing { .. })));
        let zero_pop = r#"{"type":"FeatureCollection","features":[{"type":"Feature",
            "properties":{"id":"Z","name":"Z","layer":"x","population":0},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}}]}"#;
        assert!(matches!(load_layer(zero_pop.as_bytes()), Err(GeoError::BadFeature { .. })));
    }

    #[test]
    fn unit_square_membership() {
        let sq = Region::rectangle("A", "LUZ", Some(1000), (0.0, 0.0), (1.0, 1.0));
        assert!(point_in_region(0.5, 0.5, &sq));
        assert!(!point_in_region(2.0, 2.0, &sq));
        // Edges and corners are inside.
        assert!(point_in_region(0.0, 0.5, &sq));
        assert!(point_in_region(1.0, 1.0, &sq));
        assert!(point_in_region(0.5, 0.0, &sq));
    }

    #[test]
    fn ray_through_vertex_is_counted_once() {
        // Diamond: the meridian through lon=0 passes through the top and
        // bottom vertices.
        let ring = Ring::new(vec![
            LatLon::new(0.0, -1.0),
            LatLon::new(1.0, 0.0),
            LatLon::new(0.0, 1.0),
            LatLon::new(-1.0, 0.0),
        ])
        .unwrap();
        assert_eq!(ring.locate(0.0, 0.0), Location::Inside);
        assert_eq!(ring.locate(-2.0, 0.0), Location::Outside);
        assert_eq!(ring.locate(1.0, 0.0), Location::Boundary);
    }

    #[test]
    fn hole_boundary_counts_inside_region() {
        let outer = Ring::new(vec![
            LatLon::new(0.0, 0.0),
            LatLon::new(0.0, 4.0),
            LatLon::new(4.0, 4.0),
            LatLon::new(4.0, 0.0),
        ])
        .unwrap();
        let hole = Ring::new(vec![
            LatLon::new(1.0, 1.0),
            LatLon::new(1.0, 3.0),
            LatLon::new(3.0, 3.0),
            LatLon::new(3.0, 1.0),
        ])
        .unwrap();
        let r = Region::new("H", "H", "x", None, vec![Polygon { outer, holes: vec![hole] }]).unwrap();
        assert!(!point_in_region(2.0, 2.0, &r));
        assert!(point_in_region(1.0, 2.0, &r));
        assert!(point_in_region(0.5, 0.5, &r));
    }

    fn event_at(lat: f64, lon: f64) -> EventRecord {
        EventRecord {
            user_id: "u".into(),
            timestamp: chrono::DateTime::from_timestamp(0, 0).unwrap(),
            lat,
            lon,
            origin_country: None,
            dataset_tag: DatasetTag::Photo,
        }
    }

    #[test]
    fn assignment_picks_containing_region() {
        let layer = RegionLayer::new(
            "LUZ",
            vec![Region::rectangle("A", "LUZ", Some(10), (0.0, 0.0), (1.0, 1.0))],
        )
        .unwrap();
        let a = assign_events(&[event_at(0.5, 0.5), event_at(5.0, 5.0)], &layer);
        assert_eq!(a.region_of, vec![Some(0), None]);
        assert_eq!(a.overlaps, 0);
        assert_eq!(a.unassigned(), 1);
    }

    #[test]
    fn overlap_goes_to_earlier_region() {
        let layer = RegionLayer::new(
            "x",
            vec![
                Region::rectangle("first", "x", None, (0.0, 0.0), (2.0, 2.0)),
                Region::rectangle("second", "x", None, (1.0, 1.0), (3.0, 3.0)),
            ],
        )
        .unwrap();
        let a = assign_events(&[event_at(1.5, 1.5), event_at(2.5, 2.5)], &layer);
        assert_eq!(a.region_of, vec![Some(0), Some(1)]);
        assert_eq!(a.overlaps, 1);
    }

    #[test]
    fn geojson_write_then_load() {
        let layer = RegionLayer::new(
            "CON",
            vec![
                Region::rectangle("a", "CON", Some(12), (40.0, -4.0), (40.5, -3.5)),
                Region::rectangle("b", "CON", None, (41.0, 2.0), (41.5, 2.5)),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_layer_geojson(&layer, &mut buf).unwrap();
        assert_eq!(load_layer(buf.as_slice()).unwrap(), layer);
    }

    fn u_shape() -> Region {
        let ring = Ring::new(
            [(0.0, 0.0), (0.0, 3.0), (3.0, 3.0), (3.0, 2.0), (1.0, 2.0), (1.0, 1.0), (3.0, 1.0), (3.0, 0.0)]
                .into_iter()
                .map(|(lat, lon)| LatLon::new(lat, lon))
                .collect(),
        )
        .unwrap();
        Region::new("U", "U", "x", None, vec![Polygon { outer: ring, holes: vec![] }]).unwrap()
    }

    proptest! {
        #[test]
        fn bbox_prefilter_is_sound(lat in -1.0f64..4.0, lon in -1.0f64..4.0) {
            let r = u_shape();
            prop_assert_eq!(point_in_region(lat, lon, &r), point_in_polygons(lat, lon, &r.polygons));
        }

        #[test]
        fn translation_preserves_membership(
            lat in -0.5f64..3.5, lon in -0.5f64..3.5,
            dlat in -40.0f64..40.0, dlon in -90.0f64..90.0,
        ) {
            // Dyadic offsets keep translated coordinates exact.
            let dlat = (dlat * 64.0).round() / 64.0;
            let dlon = (dlon * 64.0).round() / 64.0;
            let lat = (lat * 1024.0).round() / 1024.0 + 1.0 / 4096.0;
            let lon = (lon * 1024.0).round() / 1024.0 + 1.0 / 4096.0;
            let r = u_shape();
            let shifted: Vec<Polygon> = r.polygons.iter().map(|p| Polygon {
                outer: Ring::new(p.outer.vertices().iter()
                    .map(|v| LatLon::new(v.lat + dlat, v.lon + dlon)).collect()).unwrap(),
                holes: vec![],
            }).collect();
            let moved = Region::new("U", "U", "x", None, shifted).unwrap();
            prop_assert_eq!(
                point_in_region(lat, lon, &r),
                point_in_region(lat + dlat, lon + dlon, &moved)
            );
        }

        #[test]
        fn assignment_counts_invariant_under_reordering(
            pts in proptest::collection::vec((-0.5f64..3.5, -0.5f64..3.5), 1..60),
            rot in 0usize..60,
        ) {
            let layer = RegionLayer::new("x", vec![
                u_shape(),
                Region::rectangle("R", "x", None, (1.2, 1.2), (1.8, 2.5)),
            ]).unwrap();
            let events: Vec<_> = pts.iter().map(|&(a, b)| event_at(a, b)).collect();
            let mut rotated = events.clone();
            rotated.rotate_left(rot % events.len());
            rotated.reverse();
            let a = assign_events(&events, &layer);
            let b = assign_events(&rotated, &layer);
            prop_assert_eq!(a.counts(2), b.counts(2));
            prop_assert_eq!(a.overlaps, b.overlaps);
        }
    }
}
