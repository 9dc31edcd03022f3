#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use heliomap::raster::{write_raster, GeoTransform, RasterFormat, RasterPatch, BAND_COUNT};
use heliomap::vector::{write_geojson, Feature, FeatureCollection, Geometry, Polygon};
use heliomap::ClusterModel;
use heliomap_service::{router, ServiceConfig, Session, Workspace};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub const SIZE: usize = 16;

/// Spectrum of cluster `j`: every band at `0.1 + 0.2 j`.
pub fn spectrum(j: usize) -> [f32; BAND_COUNT] {
    [0.1 + 0.2 * j as f32; BAND_COUNT]
}

/// Cluster of pixel `(r, c)` in patch `a`: quadrants 0..4. Patch `b` is
/// all cluster 2.
pub fn cluster_at(patch: &str, r: usize, c: usize) -> usize {
    match patch {
        "a" => (r >= SIZE / 2) as usize * 2 + (c >= SIZE / 2) as usize,
        _ => 2,
    }
}

fn write_patch(dir: &Path, id: &str) {
    let t = GeoTransform::north_up(500_000.0, 1_400_000.0, 10.0, 32643);
    let mut p = RasterPatch::uniform(SIZE, SIZE, [0.0f32; BAND_COUNT], t).unwrap();
    for r in 0..SIZE {
        for c in 0..SIZE {
            p.set_pixel(r, c, &spectrum(cluster_at(id, r, c)));
        }
    }
    write_raster(&p, &dir.join(format!("{id}.rgrid")), RasterFormat::Rgrid).unwrap();
}

/// Workspace with patches `a` and `b`, four clusters and farms with fids 1..=4.
pub fn workspace(root: &Path) {
    std::fs::create_dir_all(root.join("patches")).unwrap();
    let model = ClusterModel {
        k: 4,
        dim: BAND_COUNT,
        centroids: (0..4).flat_map(spectrum).collect(),
        seed: 0,
        inertia: 0.0,
    };
    std::fs::write(root.join("clusters.json"), serde_json::to_string(&model).unwrap()).unwrap();
    write_patch(&root.join("patches"), "a");
    write_patch(&root.join("patches"), "b");
    let farms = (1..=4)
        .map(|fid| {
            let x = 77.0 + fid as f64 * 0.01;
            Feature::new(Geometry::Polygon(Polygon::rect(x, 13.0, x + 0.005, 13.005)))
                .with_property("fid", fid)
                .with_property("Area", 1000.0 * fid as f64)
                .with_property("Latitude", 13.0025)
                .with_property("Longitude", x + 0.0025)
                .with_property("State", "Karnataka")
        })
        .collect();
    write_geojson(&FeatureCollection::new(farms), &root.join("predictions.geojson")).unwrap();
}

pub fn session(root: &Path, cfg: ServiceConfig) -> Arc<Session> {
    Arc::new(Session::open(Workspace::open(root).unwrap(), cfg).unwrap())
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn call(s: &Arc<Session>, method: &str, uri: &str, body: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = router(s.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

pub async fn get(s: &Arc<Session>, uri: &str) -> Reply {
    call(s, "GET", uri, None).await
}

pub async fn post(s: &Arc<Session>, uri: &str, body: &str) -> Reply {
    call(s, "POST", uri, Some(body)).await
}

/// Decoded RGB8 PNG: `(width, height, data)`.
pub fn decode_png(bytes: &[u8]) -> (usize, usize, Vec<u8>) {
    let dec = png::Decoder::new(std::io::Cursor::new(bytes.to_vec()));
    let mut reader = dec.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!(info.color_type, png::ColorType::Rgb);
    buf.truncate(info.buffer_size());
    (info.width as usize, info.height as usize, buf)
}

/// Pixels of patch `a` in cluster `j`, as feedback JSON with `class_id`.
pub fn cluster_pixels(j: usize, class_id: usize, take: usize) -> String {
    let px: Vec<String> = (0..SIZE)
        .flat_map(|r| (0..SIZE).map(move |c| (r, c)))
        .filter(|&(r, c)| cluster_at("a", r, c) == j)
        .take(take)
        .map(|(r, c)| format!(r#"{{"row":{r},"col":{c},"class_id":{class_id}}}"#))
        .collect();
    format!(r#"{{"pixels":[{}]}}"#, px.join(","))
}
