//! Single stages on hand-made fixtures.

mod common;

use std::io::{BufRead, BufReader, Read, Write};

use common::*;
use heliomap::postvec::{polygons_to_geojson, FarmPolygon};
use heliomap::raster::{write_band, write_mask, write_raster, GeoTransform, Grid, LabelMask, RasterFormat, RasterPatch, BAND_COUNT};
use heliomap::vector::{write_geojson, Feature, FeatureCollection, Geometry, Polygon};

#[test]
fn metrics_on_identical_masks_report_full_iou() {
    let d = tempfile::tempdir().unwrap();
    let (_, m) = scene(0, 1);
    let p = d.path().join("m.rgrid");
    write_mask(&m, &p).unwrap();
    let out = d.path().join("out");
    ok(&["metrics", "--pred", s(&p), "--gt", s(&p), "--out", s(&out), "--name", "same"]);
    let r = json(&out.join("metrics.json"));
    assert_eq!(r["report"]["iou"], 100.0);
    assert_eq!(r["report"]["pix_precision"], 100.0);
    assert_eq!(r["report"]["pix_recall"], 100.0);
    let txt = std::fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(txt.lines().nth(2).unwrap().starts_with("same"), "{txt}");
    assert!(txt.contains("100.00"));
}

#[test]
fn metrics_add_farm_recall_from_polygons() {
    let d = tempfile::tempdir().unwrap();
    let (_, m) = scene(0, 1);
    let p = d.path().join("m.rgrid");
    write_mask(&m, &p).unwrap();
    // two reference farms; the prediction covers half of the first only
    let gt = FeatureCollection::new(vec![
        Feature::new(Geometry::Polygon(Polygon::rect(77.000, 13.000, 77.002, 13.002))),
        Feature::new(Geometry::Polygon(Polygon::rect(77.010, 13.000, 77.012, 13.002))),
    ]);
    let pred = FeatureCollection::new(vec![Feature::new(Geometry::Polygon(Polygon::rect(77.000, 13.000, 77.001, 13.002)))]);
    let (gp, pp) = (d.path().join("gt.geojson"), d.path().join("pred.geojson"));
    write_geojson(&gt, &gp).unwrap();
    write_geojson(&pred, &pp).unwrap();
    let out = d.path().join("out");
    ok(&["metrics", "--pred", s(&p), "--gt", s(&p), "--pred-polygons", s(&pp), "--gt-polygons", s(&gp), "--out", s(&out)]);
    assert_eq!(json(&out.join("metrics.json"))["report"]["farm_recall"], 50.0);
}

fn utm_rect(id: &str, x0: f64, y0: f64, side: f64) -> FarmPolygon {
    FarmPolygon {
        id: id.into(),
        polygon: Polygon::rect(x0, y0, x0 + side, y0 + side),
        crs: EPSG,
        pixel_count: (side * side / 100.0) as usize,
        area_m2: side * side,
    }
}

#[test]
fn farms_group_two_polygons_by_distance() {
    let d = tempfile::tempdir().unwrap();
    // 200 m squares with a 300 m gap between facing edges
    let (a, b) = (utm_rect("p/0", 600_000.0, 1_440_000.0, 200.0), utm_rect("p/1", 600_500.0, 1_440_000.0, 200.0));
    let gap = b.polygon.exterior.iter().map(|c| c[0]).fold(f64::MAX, f64::min)
        - a.polygon.exterior.iter().map(|c| c[0]).fold(f64::MIN, f64::max);
    assert_eq!(gap, 300.0);
    let polys = d.path().join("polygons.geojson");
    write_geojson(&polygons_to_geojson(&[a, b]).unwrap(), &polys).unwrap();

    let fids = |dist: &str| {
        let out = d.path().join(format!("out{dist}"));
        ok(&["farms", "--polygons", s(&polys), "--distance", dist, "--out", s(&out)]);
        json(&out.join("farms.geojson"))["features"].as_array().unwrap().clone()
    };
    let merged = fids("500");
    assert_eq!(merged.len(), 1);
    assert_eq!(merged[0]["properties"]["fid"], 1);
    let area = merged[0]["properties"]["Area"].as_f64().unwrap();
    assert!((area - 80_000.0).abs() < 1e-6, "{area}");
    assert_eq!(merged[0]["properties"]["State"], "unknown");
    assert_eq!(fids("50").len(), 2);
    // the threshold is inclusive of the gap
    assert_eq!(fids("300").len(), 1);
}

#[test]
fn farms_honour_validation_tags() {
    let d = tempfile::tempdir().unwrap();
    let polys = d.path().join("polygons.geojson");
    let rects = [
        utm_rect("a/0", 600_000.0, 1_440_000.0, 100.0),
        utm_rect("a/1", 610_000.0, 1_440_000.0, 100.0),
        utm_rect("a/2", 620_000.0, 1_440_000.0, 100.0),
    ];
    write_geojson(&polygons_to_geojson(&rects).unwrap(), &polys).unwrap();
    let tags = d.path().join("tags.json");
    std::fs::write(&tags, r#"{"a/1": "invalid", "a/2": "rooftop"}"#).unwrap();
    let out = d.path().join("out");
    ok(&["farms", "--polygons", s(&polys), "--tags", s(&tags), "--out", s(&out)]);
    assert_eq!(json(&out.join("farms.geojson"))["features"].as_array().unwrap().len(), 1);
    let roofs = json(&out.join("rooftop.geojson"));
    assert_eq!(roofs["features"][0]["properties"]["pid"], "a/2");

    std::fs::write(&tags, r#"{"a/1": "maybe"}"#).unwrap();
    let r = run(&["farms", "--polygons", s(&polys), "--tags", s(&tags), "--out", s(&out)]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("maybe"));
}

#[test]
fn correlate_matches_a_direct_pearson() {
    let d = tempfile::tempdir().unwrap();
    let rows = [("2016", 1.2, 9_000.0), ("2017", 2.5, 20_500.0), ("2018", 2.9, 21_000.0), ("2019", 4.8, 41_000.0)];
    let mut text = String::from("period,capacity,area\n");
    for (p, c, a) in rows {
        text.push_str(&format!("{p}, {c}, {a}\n"));
    }
    let table = d.path().join("cap.csv");
    std::fs::write(&table, text).unwrap();
    let out = d.path().join("out");
    ok(&["correlate", "--table", s(&table), "--out", s(&out)]);

    let n = rows.len() as f64;
    let (mx, my) = (rows.iter().map(|r| r.1).sum::<f64>() / n, rows.iter().map(|r| r.2).sum::<f64>() / n);
    let cov: f64 = rows.iter().map(|r| (r.1 - mx) * (r.2 - my)).sum();
    let vx: f64 = rows.iter().map(|r| (r.1 - mx).powi(2)).sum();
    let vy: f64 = rows.iter().map(|r| (r.2 - my).powi(2)).sum();
    let expect = cov / (vx * vy).sqrt();
    let rep = json(&out.join("correlation.json"));
    let r = rep["report"]["r"].as_f64().unwrap();
    assert!((r - expect).abs() < 1e-12, "{r} vs {expect}");
    assert!((rep["report"]["r_squared"].as_f64().unwrap() - 100.0 * expect * expect).abs() < 1e-9);
    assert!(std::fs::read_to_string(out.join("correlation.txt")).unwrap().contains("Pearson r"));

    std::fs::write(&table, "period,capacity,area\n2016,1,x\n").unwrap();
    assert_eq!(run(&["correlate", "--table", s(&table), "--out", s(&out)]).code, 1);
}

#[test]
fn crosstab_counts_cells_under_farms() {
    let d = tempfile::tempdir().unwrap();
    // 10 x 10 land cover in UTM 43N; the left half is class 1, the right class 2
    let t = GeoTransform::north_up(600_000.0, 1_440_000.0, 10.0, EPSG);
    let grid = Grid::from_fn(10, 10, |_, c| if c < 5 { 1.0f32 } else { 2.0 });
    let lc = d.path().join("lc.rgrid");
    write_band(&grid, t, &lc).unwrap();
    let legend = d.path().join("legend.json");
    std::fs::write(&legend, r#"{"1": "Cropland", "2": "Barren", "3": "Water"}"#).unwrap();
    // a farm over columns 3..7 and rows 0..10, given in WGS84
    let to_ll = |x: f64, y: f64| {
        let (lon, lat) = heliomap::crs::to_lonlat(EPSG, x, y).unwrap();
        [lon, lat]
    };
    let ring = vec![
        to_ll(600_030.0, 1_439_900.0),
        to_ll(600_070.0, 1_439_900.0),
        to_ll(600_070.0, 1_440_000.0),
        to_ll(600_030.0, 1_440_000.0),
        to_ll(600_030.0, 1_439_900.0),
    ];
    let farms = FeatureCollection::new(vec![
        Feature::new(Geometry::Polygon(Polygon::new(ring, vec![]).unwrap())).with_property("fid", 1)
    ]);
    let fp = d.path().join("farms.geojson");
    write_geojson(&farms, &fp).unwrap();
    let out = d.path().join("out");
    ok(&["crosstab", "--farms", s(&fp), "--landcover", s(&lc), "--legend", s(&legend), "--out", s(&out)]);
    let tab = json(&out.join("crosstab.json"));
    assert_eq!(tab["total_cells"], 40);
    let pct: Vec<f64> = tab["rows"].as_array().unwrap().iter().map(|r| r["percent"].as_f64().unwrap()).collect();
    assert_eq!(pct, [50.0, 50.0, 0.0]);

    // a year window that excludes the only farm leaves nothing to tabulate
    let years = d.path().join("years.json");
    std::fs::write(&years, r#"{"1": 2015}"#).unwrap();
    let r = run(&[
        "crosstab", "--farms", s(&fp), "--landcover", s(&lc), "--legend", s(&legend), "--years", s(&years), "--from", "2016",
        "--out", s(&out),
    ]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(!out.join("crosstab.json").exists());
}

#[test]
fn tcm_dates_a_farm_built_mid_series() {
    let d = tempfile::tempdir().unwrap();
    let t = GeoTransform::north_up(600_000.0, 1_440_000.0, 10.0, EPSG);
    let n = 40;
    let inside = |r: usize, c: usize| (15..25).contains(&r) && (15..25).contains(&c);
    let mut scenes = Vec::new();
    for (i, year) in (2014..=2021).enumerate() {
        let mut p = RasterPatch::uniform(n, n, [0.0f32; BAND_COUNT], t).unwrap();
        for r in 0..n {
            for c in 0..n {
                // a little texture so the clusters have something to split
                let jitter = ((r * 7 + c * 3 + i) % 5) as f32 * 0.004;
                let base = if inside(r, c) && year >= 2018 { SOLAR } else { VEGETATION };
                p.set_pixel(r, c, &base.map(|v| v + jitter));
            }
        }
        let path = format!("scenes/{year}.rgrid");
        std::fs::create_dir_all(d.path().join("scenes")).unwrap();
        write_raster(&p, &d.path().join(&path), RasterFormat::Rgrid).unwrap();
        scenes.push(serde_json::json!({"date": format!("{year}-03-01"), "path": path}));
    }
    let manifest = d.path().join("manifest.json");
    std::fs::write(&manifest, serde_json::json!({"farms": [{"fid": 1, "scenes": scenes}]}).to_string()).unwrap();
    let (x0, y1) = t.pixel_to_world(15.0, 15.0);
    let (x1, y0) = t.pixel_to_world(25.0, 25.0);
    let ll = |x, y| {
        let (lon, lat) = heliomap::crs::to_lonlat(EPSG, x, y).unwrap();
        [lon, lat]
    };
    let ring = vec![ll(x0, y0), ll(x1, y0), ll(x1, y1), ll(x0, y1), ll(x0, y0)];
    let farms = FeatureCollection::new(vec![
        Feature::new(Geometry::MultiPolygon(vec![Polygon::new(ring, vec![]).unwrap()])).with_property("fid", 1)
    ]);
    let fp = d.path().join("farms.geojson");
    write_geojson(&farms, &fp).unwrap();
    let out = d.path().join("out");
    ok(&["tcm", "--manifest", s(&manifest), "--farms", s(&fp), "--out", s(&out)]);
    assert_eq!(json(&out.join("years.json")), serde_json::json!({"1": 2018}));
    let series = json(&out.join("tcm.json"));
    assert_eq!(series["farms"][0]["kl"].as_array().unwrap().len(), 8);
    assert_eq!(series["farms"][0]["change"]["date"], "2018-03-01");
}

#[test]
fn serve_answers_health_checks() {
    let d = tempfile::tempdir().unwrap();
    let ws = d.path().join("ws");
    std::fs::create_dir_all(ws.join("patches")).unwrap();
    let (p, _) = scene(0, 3);
    write_raster(&p, &ws.join("patches/a.rgrid"), RasterFormat::Rgrid).unwrap();
    let model = heliomap::ClusterModel {
        k: 2,
        dim: BAND_COUNT,
        centroids: VEGETATION.iter().chain(&SOLAR).copied().collect(),
        seed: 0,
        inertia: 0.0,
    };
    std::fs::write(ws.join("clusters.json"), serde_json::to_string(&model).unwrap()).unwrap();

    let mut child = heliomap()
        .args(["serve", "--workspace", s(&ws), "--port", "0"])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut err = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    err.read_line(&mut line).unwrap();
    let addr = line.trim().rsplit("http://").next().unwrap().to_string();
    let mut stream = std::net::TcpStream::connect(&addr).unwrap_or_else(|e| panic!("{line}: {e}"));
    write!(stream, "GET /api/patches HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("\"patch_id\":\"a\""), "{resp}");
    assert!(!ws.join("serve.run.json").exists());
}

#[test]
fn masks_need_matching_patches_for_a_dataset() {
    let d = tempfile::tempdir().unwrap();
    let (patches, masks) = dataset(d.path(), 3);
    std::fs::remove_file(patches.join("s01.rgrid")).unwrap();
    let out = d.path().join("out");
    let r = run(&["dataset", "--masks", s(&masks), "--patches", s(&patches), "--out", s(&out)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("s01"), "{}", r.stderr);
    ok(&["dataset", "--masks", s(&masks), "--out", s(&out), "--seed", "3"]);
    let split = json(&out.join("split.json"));
    assert_eq!(split["seed"], 3);
    let all: usize = ["train", "val", "test"].iter().map(|k| split[k].as_array().unwrap().len()).sum();
    assert_eq!(all, 3);
}

#[test]
fn post_filters_water_and_traces_polygons() {
    let d = tempfile::tempdir().unwrap();
    let t = GeoTransform::north_up(600_000.0, 1_440_000.0, 10.0, EPSG);
    // vegetation everywhere; rows 0..4 are open water
    let mut p = RasterPatch::uniform(12, 12, VEGETATION, t).unwrap();
    let water = [0.06, 0.07, 0.06, 0.04, 0.03, 0.02, 0.02, 0.30, 0.02, 0.01, 0.01, 0.01f32];
    for r in 0..4 {
        for c in 0..12 {
            p.set_pixel(r, c, &water);
        }
    }
    let pd = d.path().join("patches");
    let pred = d.path().join("pred");
    std::fs::create_dir_all(&pd).unwrap();
    std::fs::create_dir_all(&pred).unwrap();
    write_raster(&p, &pd.join("a.rgrid"), RasterFormat::Rgrid).unwrap();
    // one blob in the water, one on land
    let m = Grid::from_fn(12, 12, |r, c| ((1..3).contains(&r) && (1..4).contains(&c) || (6..9).contains(&r) && (6..10).contains(&c)) as u8);
    write_mask(&LabelMask::new(m, t).unwrap(), &pred.join("a.rgrid")).unwrap();
    let out = d.path().join("out");
    ok(&["post", "--pred", s(&pred), "--patches", s(&pd), "--out", s(&out)]);
    let polys = json(&out.join("polygons.geojson"));
    let feats = polys["features"].as_array().unwrap();
    assert_eq!(feats.len(), 1);
    assert_eq!(feats[0]["properties"]["pid"], "a/0");
    assert_eq!(feats[0]["properties"]["pixel_count"], 12);
    let summary = json(&out.join("post_summary.json"));
    assert_eq!(summary["patches"][0]["predicted"], 18);
    assert_eq!(summary["patches"][0]["kept"], 12);
}
