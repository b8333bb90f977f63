//! MRCLAM dataset ingestion.
//!
//! Reads the whitespace-separated text files of the public dataset layout
//! (`Barcodes.dat`, `Landmark_Groundtruth.dat`, `RobotN_Groundtruth.dat`,
//! `RobotN_Measurement.dat`). Measurement bearings are body-frame, counter-
//! clockwise from the robot heading, the same convention as
//! [`Pose2::bearing_to`]. Ranges are ignored.
//!
//! Every robot becomes one [`Scenario`]: measurements inside a short window
//! form a view, every landmark triplet seen in a view is a candidate
//! observation, and a triplet keeps only views far enough apart in time and
//! space. Triplets with fewer than `min_views` kept views are dropped. Poses
//! are interpolated from ground truth and actions are ground-truth azimuths.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{azimuth, wrap_angle, Point2, Pose2};
use crate::models::{Action, NoiseConfig, Observation, TripletId};
use crate::simulation::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    pub time: f64,
    pub pose: Pose2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub time: f64,
    pub barcode: u32,
    pub range: f64,
    pub bearing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotLog {
    pub id: u32,
    pub groundtruth: Vec<TimedPose>,
    pub measurements: Vec<Measurement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrclamBundle {
    pub landmark_gt: BTreeMap<u32, Point2>,
    pub robots: Vec<RobotLog>,
    /// Barcode to subject id.
    pub barcode_map: BTreeMap<u32, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestConfig {
    /// Measurements within this many seconds of a view's first one join it.
    pub view_window: f64,
    /// Minimum time between two kept views of one triplet, seconds.
    pub min_view_gap: f64,
    /// Minimum ground-truth displacement between two kept views, meters.
    pub min_displacement: f64,
    pub min_views: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            view_window: 0.5,
            min_view_gap: 2.0,
            min_displacement: 0.05,
            min_views: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    /// Measurements whose barcode is not in the barcode table.
    pub unresolved_barcodes: usize,
    /// Measurements of other robots.
    pub robot_measurements: usize,
    /// Views outside the ground-truth time span.
    pub views_without_groundtruth: usize,
    pub views: usize,
    /// Distinct triplets emitted over all robots.
    pub triplets: usize,
    pub triplets_per_robot: Vec<(u32, usize)>,
}

fn parse_error(source: &str, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        line,
        column,
        message: message.into(),
    }
}

/// Rows of numbers, skipping blank and `#` lines. Each row needs at least `min_cols` fields.
fn parse_table(source: &str, text: &str, min_cols: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let body = line.trim_start();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut fields = Vec::new();
        let mut rest = line;
        let mut offset = 0;
        while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
            let end = rest[start..].find(char::is_whitespace).map_or(rest.len(), |e| start + e);
            let tok = &rest[start..end];
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_error(source, n + 1, offset + start + 1, format!("not a number: '{tok}'")))?;
            fields.push(v);
            offset += end;
            rest = &rest[end..];
        }
        if fields.len() < min_cols {
            return Err(parse_error(
                source,
                n + 1,
                1,
                format!("expected {min_cols} columns, found {}", fields.len()),
            ));
        }
        rows.push((n + 1, fields));
    }
    Ok(rows)
}

fn as_id(source: &str, line: usize, v: f64) -> Result<u32> {
    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
        return Err(parse_error(source, line, 1, format!("not an id: {v}")));
    }
    Ok(v as u32)
}

fn check_monotone(source: &str, rows: &[(usize, Vec<f64>)]) -> Result<()> {
    for w in rows.windows(2) {
        if w[1].1[0] < w[0].1[0] {
            return Err(parse_error(source, w[1].0, 1, "timestamps go backwards"));
        }
    }
    Ok(())
}

pub fn parse_barcodes(source: &str, text: &str) -> Result<BTreeMap<u32, u32>> {
    parse_table(source, text, 2)?
        .into_iter()
        .map(|(line, r)| Ok((as_id(source, line, r[1])?, as_id(source, line, r[0])?)))
        .collect()
}

pub fn parse_landmarks(source: &str, text: &str) -> Result<BTreeMap<u32, Point2>> {
    parse_table(source, text, 3)?
        .into_iter()
        .map(|(line, r)| Ok((as_id(source, line, r[0])?, Point2::new(r[1], r[2]))))
        .collect()
}

pub fn parse_groundtruth(source: &str, text: &str) -> Result<Vec<TimedPose>> {
    let rows = parse_table(source, text, 4)?;
    check_monotone(source, &rows)?;
    Ok(rows
        .into_iter()
        .map(|(_, r)| TimedPose {
            time: r[0],
            pose: Pose2::new(r[1], r[2], r[3]),
        })
        .collect())
}

pub fn parse_measurements(source: &str, text: &str) -> Result<Vec<Measurement>> {
    let rows = parse_table(source, text, 4)?;
    check_monotone(source, &rows)?;
    rows.into_iter()
        .map(|(line, r)| {
            Ok(Measurement {
                time: r[0],
                barcode: as_id(source, line, r[1])?,
                range: r[2],
                bearing: r[3],
            })
        })
        .collect()
}

fn read(dir: &Path, name: &str) -> Result<(String, String)> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok((path.display().to_string(), text))
}

/// Reads one dataset directory. Robots are numbered from 1 until a
/// ground-truth file is missing.
pub fn read_mrclam_dir(dir: &Path) -> Result<MrclamBundle> {
    let (src, text) = read(dir, "Barcodes.dat")?;
    let barcode_map = parse_barcodes(&src, &text)?;
    let (src, text) = read(dir, "Landmark_Groundtruth.dat")?;
    let landmark_gt = parse_landmarks(&src, &text)?;
    let mut robots = Vec::new();
    for id in 1u32.. {
        if !dir.join(format!("Robot{id}_Groundtruth.dat")).exists() {
            break;
        }
        let (src, text) = read(dir, &format!("Robot{id}_Groundtruth.dat"))?;
        let groundtruth = parse_groundtruth(&src, &text)?;
        let (src, text) = read(dir, &format!("Robot{id}_Measurement.dat"))?;
        let measurements = parse_measurements(&src, &text)?;
        robots.push(RobotLog {
            id,
            groundtruth,
            measurements,
        });
    }
    if robots.is_empty() {
        return Err(Error::InvalidArgument(format!("no Robot1_Groundtruth.dat in {}", dir.display())));
    }
    Ok(MrclamBundle {
        landmark_gt,
        robots,
        barcode_map,
    })
}

/// Writes a bundle in the dataset layout.
pub fn write_mrclam_dir(bundle: &MrclamBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut s = String::from("# Subject #\tBarcode #\n");
    for (barcode, subject) in &bundle.barcode_map {
        writeln!(s, "{subject}\t{barcode}").unwrap();
    }
    fs::write(dir.join("Barcodes.dat"), s)?;
    let mut s = String::from("# Subject #\tx [m]\ty [m]\tx std-dev [m]\ty std-dev [m]\n");
    for (id, p) in &bundle.landmark_gt {
        writeln!(s, "{id}\t{:?}\t{:?}\t0\t0", p.x, p.y).unwrap();
    }
    fs::write(dir.join("Landmark_Groundtruth.dat"), s)?;
    for r in &bundle.robots {
        let mut s = String::from("# Time [sec]\tx [m]\ty [m]\torientation [rad]\n");
        for g in &r.groundtruth {
            writeln!(s, "{:?}\t{:?}\t{:?}\t{:?}", g.time, g.pose.x, g.pose.y, g.pose.alpha).unwrap();
        }
        fs::write(dir.join(format!("Robot{}_Groundtruth.dat", r.id)), s)?;
        let mut s = String::from("# Time [sec]\tSubject #\trange [m]\tbearing [rad]\n");
        for m in &r.measurements {
            writeln!(s, "{:?}\t{}\t{:?}\t{:?}", m.time, m.barcode, m.range, m.bearing).unwrap();
        }
        fs::write(dir.join(format!("Robot{}_Measurement.dat", r.id)), s)?;
    }
    Ok(())
}

/// Ground-truth pose at `t` by linear interpolation (heading along the short arc).
pub fn interpolate_pose(gt: &[TimedPose], t: f64) -> Option<Pose2> {
    let (first, last) = (gt.first()?, gt.last()?);
    if t < first.time || t > last.time {
        return None;
    }
    let n = gt.partition_point(|g| g.time <= t);
    if n == gt.len() {
        return Some(last.pose);
    }
    let (a, b) = (gt[n - 1], gt[n]);
    let span = b.time - a.time;
    let u = if span > 0.0 { (t - a.time) / span } else { 0.0 };
    Some(Pose2::new(
        a.pose.x + u * (b.pose.x - a.pose.x),
        a.pose.y + u * (b.pose.y - a.pose.y),
        a.pose.alpha + u * wrap_angle(b.pose.alpha - a.pose.alpha),
    ))
}

struct View {
    pose: Pose2,
    time: f64,
    bearings: BTreeMap<u32, f64>,
}

fn robot_views(robot: &RobotLog, bundle: &MrclamBundle, config: &IngestConfig, report: &mut IngestReport) -> Vec<View> {
    let mut resolved: Vec<(f64, u32, f64)> = Vec::new();
    for m in &robot.measurements {
        match bundle.barcode_map.get(&m.barcode) {
            None => report.unresolved_barcodes += 1,
            Some(subject) if !bundle.landmark_gt.contains_key(subject) => report.robot_measurements += 1,
            Some(subject) => resolved.push((m.time, *subject, m.bearing)),
        }
    }
    let mut views = Vec::new();
    let mut i = 0;
    while i < resolved.len() {
        let t0 = resolved[i].0;
        let mut bearings = BTreeMap::new();
        let mut times = Vec::new();
        while i < resolved.len() && resolved[i].0 - t0 <= config.view_window {
            let (t, subject, phi) = resolved[i];
            if !bearings.contains_key(&subject) {
                bearings.insert(subject, wrap_angle(phi));
                times.push(t);
            }
            i += 1;
        }
        let time = times.iter().sum::<f64>() / times.len() as f64;
        match interpolate_pose(&robot.groundtruth, time) {
            Some(pose) => views.push(View { pose, time, bearings }),
            None => report.views_without_groundtruth += 1,
        }
    }
    views
}

/// Builds one scenario per robot. Triplets are ordered by ascending landmark id.
pub fn ingest_mrclam(
    bundle: &MrclamBundle,
    noise: NoiseConfig,
    config: &IngestConfig,
) -> Result<(Vec<Scenario>, IngestReport)> {
    let mut report = IngestReport::default();
    let mut scenarios = Vec::new();
    let mut all_triplets = BTreeSet::new();
    for robot in &bundle.robots {
        let views = robot_views(robot, bundle, config, &mut report);
        report.views += views.len();
        // Kept view indices per triplet.
        let mut kept: BTreeMap<TripletId, Vec<usize>> = BTreeMap::new();
        for (v, view) in views.iter().enumerate() {
            let ids: Vec<u32> = view.bearings.keys().copied().collect();
            for a in 0..ids.len() {
                for b in a + 1..ids.len() {
                    for c in b + 1..ids.len() {
                        let list = kept.entry((ids[a], ids[b], ids[c])).or_default();
                        let ok = list.last().is_none_or(|&last| {
                            let prev = &views[last];
                            view.time - prev.time >= config.min_view_gap
                                && view.pose.position().distance(prev.pose.position()) >= config.min_displacement
                        });
                        if ok {
                            list.push(v);
                        }
                    }
                }
            }
        }
        kept.retain(|_, list| list.len() >= config.min_views);
        report.triplets_per_robot.push((robot.id, kept.len()));
        if kept.is_empty() {
            continue;
        }
        let used: BTreeSet<usize> = kept.values().flatten().copied().collect();
        let index: BTreeMap<usize, usize> = used.iter().enumerate().map(|(n, v)| (*v, n)).collect();
        let trajectory: Vec<Pose2> = used.iter().map(|&v| views[v].pose).collect();
        let actions = trajectory
            .windows(2)
            .enumerate()
            .map(|(n, w)| Action {
                time_index: n,
                psi: azimuth(w[0].position(), w[1].position()),
            })
            .collect();
        let mut observations = Vec::new();
        for (&v, &n) in &index {
            for (&t, list) in &kept {
                if list.contains(&v) {
                    let b = &views[v].bearings;
                    observations.push(Observation {
                        time_index: n,
                        triplet: t,
                        bearings: [b[&t.0], b[&t.1], b[&t.2]],
                    });
                }
            }
        }
        let mut landmarks = BTreeMap::new();
        for t in kept.keys() {
            all_triplets.insert(*t);
            for id in [t.0, t.1, t.2] {
                landmarks.insert(id, bundle.landmark_gt[&id]);
            }
        }
        scenarios.push(Scenario {
            landmarks,
            trajectory,
            observations,
            actions,
            noise,
            seed: robot.id as u64,
        });
    }
    report.triplets = all_triplets.len();
    Ok((scenarios, report))
}

/// Layout of a synthetic dataset with the structure of the real one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub robots: u32,
    pub landmarks: u32,
    pub duration: f64,
    /// Ground-truth sample period, seconds.
    pub gt_period: f64,
    /// Time between landmark sweeps, seconds.
    pub sweep_period: f64,
    pub max_range: f64,
    /// Half field of view, radians.
    pub half_fov: f64,
    pub speed: f64,
    /// Bearing noise, radians.
    pub sigma_bearing: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            robots: 5,
            landmarks: 15,
            duration: 120.0,
            gt_period: 0.1,
            sweep_period: 1.0,
            max_range: 4.0,
            half_fov: 60f64.to_radians(),
            speed: 0.15,
            sigma_bearing: 0.0,
        }
    }
}

/// Landmark barcodes are `100 + subject`, robot barcodes `50 + subject`.
/// Robots random-walk inside a 6 m x 7 m arena; each sweep measures every
/// landmark in range and view at one instant, plus any robot in view.
pub fn synthetic_bundle<R: Rng + ?Sized>(config: &SyntheticConfig, rng: &mut R) -> MrclamBundle {
    let (lo, hi) = (Point2::new(-3.0, -3.0), Point2::new(3.0, 4.0));
    let first_landmark = config.robots + 1;
    let landmark_gt: BTreeMap<u32, Point2> = (0..config.landmarks)
        .map(|n| {
            (
                first_landmark + n,
                Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y)),
            )
        })
        .collect();
    let mut barcode_map = BTreeMap::new();
    for s in 1..=config.robots {
        barcode_map.insert(50 + s, s);
    }
    for s in landmark_gt.keys() {
        barcode_map.insert(100 + s, *s);
    }
    let steps = (config.duration / config.gt_period).round() as usize;
    let sweep_every = (config.sweep_period / config.gt_period).round().max(1.0) as usize;
    let mut paths: Vec<Vec<TimedPose>> = Vec::new();
    for _ in 0..config.robots {
        let mut p = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        let mut heading: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let mut gt = Vec::with_capacity(steps + 1);
        for n in 0..=steps {
            gt.push(TimedPose {
                time: 1000.0 + n as f64 * config.gt_period,
                pose: Pose2::from_point(p, heading),
            });
            heading += rng.random_range(-0.15..0.15);
            let next = p + Point2::from_angle(heading) * (config.speed * config.gt_period);
            if next.x < lo.x || next.x > hi.x || next.y < lo.y || next.y > hi.y {
                heading += std::f64::consts::PI;
            } else {
                p = next;
            }
        }
        paths.push(gt);
    }
    let mut robots = Vec::new();
    for (r, gt) in paths.iter().enumerate() {
        let mut measurements = Vec::new();
        for (n, g) in gt.iter().enumerate().step_by(sweep_every) {
            let mut seen: Vec<(u32, Point2)> = landmark_gt.iter().map(|(id, p)| (100 + id, *p)).collect();
            for (o, other) in paths.iter().enumerate() {
                if o != r {
                    seen.push((51 + o as u32, other[n].pose.position()));
                }
            }
            for (barcode, target) in seen {
                let range = g.pose.position().distance(target);
                let bearing = g.pose.bearing_to(target);
                if range > 1e-6 && range <= config.max_range && bearing.abs() <= config.half_fov {
                    let noise = if config.sigma_bearing > 0.0 {
                        let u: f64 = rng.random_range(-1.0..1.0);
                        u * config.sigma_bearing * 3f64.sqrt()
                    } else {
                        0.0
                    };
                    measurements.push(Measurement {
                        time: g.time,
                        barcode,
                        range,
                        bearing: wrap_angle(bearing + noise),
                    });
                }
            }
        }
        robots.push(RobotLog {
            id: r as u32 + 1,
            groundtruth: gt.clone(),
            measurements,
        });
    }
    MrclamBundle {
        landmark_gt,
        robots,
        barcode_map,
    }
}
