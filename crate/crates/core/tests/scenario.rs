use crowdflow::alert::{check_alerts, cohort_report, density_map, AlertDeduper, CohortIdTracker, ReportConfig};
use crowdflow::geometry::{angular_diff, Detection, Vec2};
use crowdflow::linker::{track_sequence, TrackerConfig};
use crowdflow::sim::{preset_scenario, simulate, CohortSpec, Region, ScenarioConfig, WalkerSpec, PRESET_NAMES};
use crowdflow::Error;
use std::f64::consts::{FRAC_PI_2, PI};

fn mean_var(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 0 { (v[m - 1] + v[m]) / 2.0 } else { v[m] }
}

/// I1(k) / I0(k) from the power series.
fn bessel_ratio(k: f64) -> f64 {
    let (mut t0, mut t1) = (1.0, k / 2.0);
    let (mut s0, mut s1) = (t0, t1);
    for j in 1..200 {
        let q = (k / 2.0) * (k / 2.0);
        t0 *= q / (j * j) as f64;
        t1 *= q / (j * (j + 1)) as f64;
        s0 += t0;
        s1 += t1;
    }
    s1 / s0
}

#[test]
fn clutter_counts_are_poisson() {
    let cfg = ScenarioConfig { n_frames: 3000, clutter_rate: 7.0, seed: 4, ..ScenarioConfig::default() };
    let (frames, gt) = simulate(&cfg).unwrap();
    let counts: Vec<f64> = frames.iter().map(|f| f.len() as f64).collect();
    let (m, v) = mean_var(&counts);
    // standard error of the mean is sqrt(7 / 3000) ~ 0.05
    assert!((m - 7.0).abs() < 0.2, "mean {m}");
    assert!((v / m - 1.0).abs() < 0.1, "dispersion {}", v / m);
    assert!(gt.rows.iter().all(|r| r.object_id == -1 && r.cohort_id == -1));
    // uniform over the arena: quadrant counts within 4 standard deviations
    let all: Vec<Detection<f64>> = frames.concat();
    let dm = density_map(&all, cfg.arena, 400.0).unwrap();
    assert_eq!((dm.cols, dm.rows), (2, 2));
    let n = all.len() as f64;
    for &c in &dm.counts {
        assert!((c as f64 - n / 4.0).abs() < 4.0 * (n * 0.25 * 0.75).sqrt(), "{:?}", dm.counts);
    }
}

#[test]
fn miss_rate_and_walker_steps() {
    let cfg = ScenarioConfig {
        arena: (1e6, 1e6),
        n_frames: 200,
        walkers: WalkerSpec { count: 50, step_sigma: 1.5 },
        p_miss: 0.3,
        seed: 9,
        ..ScenarioConfig::default()
    };
    let (frames, gt) = simulate(&cfg).unwrap();
    let emitted: usize = frames.iter().map(|f| f.len()).sum();
    let rate = 1.0 - emitted as f64 / (50.0 * 200.0);
    assert!((rate - 0.3).abs() < 0.02, "miss rate {rate}");
    let steps: Vec<f64> = gt
        .trajectories
        .iter()
        .flat_map(|t| t.windows(2).flat_map(|w| [w[1].x - w[0].x, w[1].y - w[0].y]))
        .collect();
    let (m, v) = mean_var(&steps);
    assert!(m.abs() < 0.05, "drift {m}");
    assert!((v.sqrt() - 1.5).abs() < 0.03, "sigma {}", v.sqrt());
}

#[test]
fn cohort_headings_follow_von_mises() {
    let spec = CohortSpec {
        count: 200,
        direction: 2.0,
        speed: 3.0,
        heading_kappa: 4.0,
        spawn_region: Region::new(4e5, 4e5, 6e5, 6e5),
        onset_frame: 0,
    };
    let cfg = ScenarioConfig { arena: (1e6, 1e6), n_frames: 30, cohorts: vec![spec], seed: 2, ..ScenarioConfig::default() };
    let (_, gt) = simulate(&cfg).unwrap();
    let (mut c, mut s, mut n) = (0.0, 0.0, 0.0);
    for t in &gt.trajectories {
        for w in t.windows(2) {
            let d = w[1].sub(w[0]);
            assert!((d.norm() - 3.0).abs() < 1e-9);
            c += d.angle().cos();
            s += d.angle().sin();
            n += 1.0;
        }
    }
    let rbar = (c * c + s * s).sqrt() / n;
    assert!((rbar - bessel_ratio(4.0)).abs() < 0.01, "{rbar} vs {}", bessel_ratio(4.0));
    assert!(angular_diff(s.atan2(c), 2.0).abs() < 0.02);
}

#[test]
fn onset_cohort_jitters_until_onset() {
    let (_, gt) = simulate(&preset_scenario("onset").unwrap()).unwrap();
    for (id, t) in gt.trajectories.iter().enumerate() {
        if gt.cohort_of[id] == 0 {
            // walker steps have sigma 0.5 per axis
            assert!(t[..=10].windows(2).all(|w| w[1].sub(w[0]).norm() < 4.0));
            assert!((t[11].sub(t[10]).norm() - 4.0).abs() < 1e-9);
        }
    }
}

#[test]
fn presets_are_deterministic_and_consistent() {
    for name in PRESET_NAMES {
        let cfg = preset_scenario(name).unwrap();
        let (a, gt) = simulate(&cfg).unwrap();
        let (b, _) = simulate(&cfg).unwrap();
        assert_eq!(a, b, "{name}");
        assert_eq!(gt.detections(), a);
        let (c, _) = simulate(&ScenarioConfig { seed: cfg.seed + 1, ..cfg.clone() }).unwrap();
        assert_ne!(a, c);
        for f in &a {
            assert!(f.iter().all(|d| d.x >= 0.0 && d.x <= cfg.arena.0 && d.y >= 0.0 && d.y <= cfg.arena.1));
        }
    }
    assert!(matches!(preset_scenario("nope"), Err(Error::UnknownPreset { .. })));
}

#[test]
fn invalid_scenarios_rejected() {
    let ok = preset_scenario("sparse").unwrap();
    assert!(simulate(&ScenarioConfig { p_miss: 1.0, ..ok.clone() }).is_err());
    assert!(simulate(&ScenarioConfig { clutter_rate: -1.0, ..ok.clone() }).is_err());
    assert!(simulate(&ScenarioConfig { n_frames: 0, ..ok.clone() }).is_err());
    let mut far = ok.clone();
    far.cohorts[0].spawn_region = Region::new(0.0, 0.0, 2000.0, 10.0);
    assert!(simulate(&far).is_err());
    let mut fast = ok;
    fast.cohorts[0].speed = 1e3;
    assert!(simulate(&fast).is_err());
}

#[test]
fn clutter_density_within_poisson_bounds() {
    let cfg = ScenarioConfig { n_frames: 100, clutter_rate: 500.0, seed: 6, ..ScenarioConfig::default() };
    let (frames, _) = simulate(&cfg).unwrap();
    let dm = density_map(&frames.concat(), cfg.arena, 50.0).unwrap();
    assert_eq!(dm.counts.len(), 256);
    // per cell and frame the count is Poisson(500 / 256)
    let lam: f64 = 500.0 / 256.0;
    let sigma = (lam / 100.0).sqrt();
    let inside = dm.counts.iter().filter(|&&c| (c as f64 / 100.0 - lam).abs() <= 3.0 * sigma).count();
    assert!(inside as f64 >= 0.99 * 256.0, "{inside} of 256 cells");
    assert_eq!(dm.total(), frames.iter().map(|f| f.len() as u64).sum::<u64>());
}

#[test]
fn clutter_rarely_linked() {
    for seed in 0..5 {
        let mut scen = preset_scenario("interdigitated").unwrap();
        scen.seed = seed;
        // one detection in ten is clutter
        scen.clutter_rate = scen.population() as f64 * (1.0 - scen.p_miss) / 9.0;
        let (frames, gt) = simulate(&scen).unwrap();
        let cfg = TrackerConfig { arena: Some(scen.arena), ..TrackerConfig::default() };
        let res = track_sequence(&frames, &cfg).unwrap();
        let key = |f: usize, p: Vec2<f64>| (f, p.x.to_bits(), p.y.to_bits());
        let clutter: std::collections::HashSet<_> =
            gt.rows.iter().filter(|r| r.object_id < 0).map(|r| key(r.frame, Vec2::new(r.x, r.y))).collect();
        let truth: std::collections::HashSet<_> =
            gt.true_links().iter().map(|&(f, a, b, _)| (key(f, a), key(f + 1, b))).collect();
        let (mut bad, mut hit, mut total) = (0usize, 0usize, 0usize);
        for s in &res.steps {
            for l in &s.links {
                let (a, b) = (key(s.frame, l.from_pos), key(s.frame + 1, l.to_pos));
                total += 1;
                bad += (clutter.contains(&a) || clutter.contains(&b)) as usize;
                hit += truth.contains(&(a, b)) as usize;
            }
        }
        let clutter_frac = bad as f64 / total as f64;
        let recall = hit as f64 / truth.len() as f64;
        assert!(clutter_frac < 0.02, "seed {seed}: clutter links {clutter_frac}");
        assert!(recall >= 0.9, "seed {seed}: recall {recall}");
    }
}

#[test]
fn density_cells_are_half_open() {
    let d = |x: f64, y: f64| Detection::new(0, x, y, 1.0);
    let dets = [d(0.0, 0.0), d(9.999, 0.0), d(10.0, 0.0), d(25.0, 19.0), d(30.0, 5.0), d(-1.0, 3.0)];
    let m = density_map(&dets, (25.0, 20.0), 10.0).unwrap();
    assert_eq!((m.cols, m.rows), (3, 2));
    assert_eq!(m.counts, vec![2, 1, 0, 0, 0, 0]);
    assert!(density_map(&dets, (25.0, 20.0), 0.0).is_err());
}

#[test]
fn onset_alert_eta_matches_true_cohort() {
    let scen = preset_scenario("onset").unwrap();
    let (frames, gt) = simulate(&scen).unwrap();
    let cfg = TrackerConfig { arena: Some(scen.arena), calib: scen.calib, ..TrackerConfig::default() };
    let res = track_sequence(&frames, &cfg).unwrap();
    let rcfg = ReportConfig::default();
    let mut ids = CohortIdTracker::default();
    let mut dedup = AlertDeduper::default();
    let members: Vec<usize> = (0..gt.cohort_of.len()).filter(|&i| gt.cohort_of[i] == 0).collect();
    let key = |p: Vec2<f64>| (p.x.to_bits(), p.y.to_bits());
    let speed_mps = 4.0 * scen.calib.meters_per_pixel * scen.calib.fps;
    let gate = &scen.locations[0];
    let mut checked = 0;
    let (mut centroid_err, mut eta_err) = (Vec::new(), Vec::new());
    for s in &res.steps {
        let mut reports = cohort_report(&s.model, &s.vectors, &scen.calib, s.frame, &rcfg);
        ids.assign(&mut reports);
        for r in &reports {
            // a report speaks for the cohort when most of its links start on members
            let at: std::collections::HashSet<_> = members.iter().map(|&i| key(gt.trajectories[i][s.frame])).collect();
            let labelled: Vec<_> = (0..s.links.len()).filter(|&k| s.label_of(k) == Some(r.component)).collect();
            let own = labelled.iter().filter(|&&k| at.contains(&key(s.links[k].from_pos))).count();
            if 2 * own <= labelled.len() {
                continue;
            }
            for a in check_alerts(r, &scen.locations, &scen.calib, rcfg.angle_tol_deg) {
                assert!(s.frame >= 10, "cohort alert before onset at frame {}", s.frame);
                if !dedup.admit(&a) {
                    continue;
                }
                // ETA from the report's own estimates
                let mps = r.mean_speed * scen.calib.meters_per_pixel * scen.calib.fps;
                let want = (gate.position.sub(r.centroid).norm() - gate.radius) * scen.calib.meters_per_pixel / mps;
                assert!((a.eta_seconds - want).abs() < 1e-9 * want, "frame {}: eta {} vs {want}", s.frame, a.eta_seconds);
                // and those estimates against the simulated cohort
                let c = members.iter().fold(Vec2::new(0.0, 0.0), |acc, &i| acc.add(gt.trajectories[i][s.frame]));
                let c = Vec2::new(c.x / members.len() as f64, c.y / members.len() as f64);
                centroid_err.push(r.centroid.sub(c).norm());
                assert!(angular_diff(r.mean_direction, -FRAC_PI_2).abs() < 0.2);
                let true_eta = (gate.position.sub(c).norm() - gate.radius) * scen.calib.meters_per_pixel / speed_mps;
                eta_err.push((a.eta_seconds - true_eta).abs() / true_eta);
                checked += 1;
            }
        }
    }
    assert!(checked >= 1, "no alert issued");
    // a report covers only the linked members, so its centroid is a subsample mean
    assert!(median(&mut centroid_err) < 40.0, "{centroid_err:?}");
    assert!(median(&mut eta_err) < 0.25, "{eta_err:?}");
}

#[test]
fn cohort_ids_stay_stable_on_interdigitated() {
    let scen = preset_scenario("interdigitated").unwrap();
    let (frames, _) = simulate(&scen).unwrap();
    let cfg = TrackerConfig { arena: Some(scen.arena), ..TrackerConfig::default() };
    let res = track_sequence(&frames, &cfg).unwrap();
    let mut ids = CohortIdTracker::default();
    let (mut east, mut west) = (std::collections::HashSet::new(), std::collections::HashSet::new());
    for s in &res.steps[2..] {
        let mut reports = cohort_report(&s.model, &s.vectors, &scen.calib, s.frame, &ReportConfig::default());
        ids.assign(&mut reports);
        for r in &reports {
            if angular_diff(r.mean_direction, 0.0).abs() < 0.3 {
                east.insert(r.cohort_id);
            } else if angular_diff(r.mean_direction, PI).abs() < 0.3 {
                west.insert(r.cohort_id);
            }
        }
    }
    assert_eq!(east.len(), 1, "{east:?}");
    assert_eq!(west.len(), 1, "{west:?}");
    assert!(east.is_disjoint(&west));
}
