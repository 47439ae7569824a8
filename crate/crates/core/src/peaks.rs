//! Peak detection, topographic prominence, and side-peak tracking.
//!
//! A peak is an interior strict local maximum of an occupation profile,
//! with runs of equal values merged to their leftmost site. Prominence is
//! topographic: per side, the drop from the peak to the lowest point
//! between it and the nearest strictly higher peak, the chain ends acting
//! as walls when no higher peak exists. Tracking follows peaks through a
//! trajectory and scores each side-peak track by the growth of its
//! prominence, the per-realization scalar used to rank disorder draws.

use crate::evolution::Trajectory;
use crate::lattice::OccupationProfile;
use serde::Serialize;
use thiserror::Error;

/// Heights below this are noise ripple, not structure; weak-dephasing
/// tails sit many decades lower than any physical peak.
pub const DEFAULT_PEAK_FLOOR: f64 = 1e-12;

/// Matching radius, in sites, when associating peaks across consecutive
/// trajectory samples.
pub const DEFAULT_TRACK_WINDOW: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PeakError {
    #[error("site {site} is not a detected peak")]
    NotAPeak { site: usize },
}

/// One detected peak with its height and prominences. `site` is a 0-based
/// storage index; presentation layers print 1-based positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakRecord {
    pub site: usize,
    pub height: f64,
    pub left_prominence: f64,
    pub right_prominence: f64,
    pub prominence: f64,
}

/// One peak followed through time: parallel vectors of sample time,
/// prominence, and matched site.
#[derive(Clone, Debug, Serialize)]
pub struct PeakTrack {
    pub times: Vec<f64>,
    pub prominences: Vec<f64>,
    pub sites: Vec<usize>,
    /// Present in the first trajectory sample; such tracks measure growth
    /// against their initial prominence, later-born tracks against zero.
    pub born_at_start: bool,
}

impl PeakTrack {
    /// Largest increase of prominence over the track's samples relative
    /// to its baseline (initial prominence, or zero for late-born tracks).
    pub fn growth(&self) -> f64 {
        let base = if self.born_at_start {
            self.prominences[0]
        } else {
            0.0
        };
        let top = self
            .prominences
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        top - base
    }
}

/// Side-peak tracks of one trajectory with their growths and the
/// realization's delta statistic.
#[derive(Clone, Debug, Serialize)]
pub struct ProminenceReport {
    /// Tracks other than the main-peak track, ordered by birth.
    pub tracked_peaks: Vec<PeakTrack>,
    /// Growth of each side-peak track, aligned with `tracked_peaks`.
    pub growths: Vec<f64>,
    /// Largest growth over side-peak tracks; 0 when there are none.
    pub delta: f64,
    pub reference_gamma: f64,
    /// The track containing the initial main peak, when one was detected.
    pub main_track: Option<PeakTrack>,
    /// Time grid the maxima were taken over.
    pub sample_times: Vec<f64>,
}

/// Interior strict local maxima of `p`, plateau runs merged to their
/// leftmost site, heights below `floor` discarded. Sites ascend.
pub fn find_peaks(p: &OccupationProfile, floor: f64) -> Vec<usize> {
    peak_sites(&p.populations, floor)
}

fn peak_sites(v: &[f64], floor: f64) -> Vec<usize> {
    let n = v.len();
    let mut out = Vec::new();
    let mut a = 0;
    while a < n {
        let mut b = a;
        while b + 1 < n && v[b + 1] == v[a] {
            b += 1;
        }
        // Runs touching either end are never peaks.
        if a > 0 && b + 1 < n && v[a - 1] < v[a] && v[b + 1] < v[a] && v[a] >= floor {
            out.push(a);
        }
        a = b + 1;
    }
    out
}

/// Prominence of the peak at `peak_site` under the default noise floor.
pub fn prominence(p: &OccupationProfile, peak_site: usize) -> Result<PeakRecord, PeakError> {
    prominence_with_floor(p, peak_site, DEFAULT_PEAK_FLOOR)
}

pub fn prominence_with_floor(
    p: &OccupationProfile,
    peak_site: usize,
    floor: f64,
) -> Result<PeakRecord, PeakError> {
    let v = &p.populations;
    let peaks = peak_sites(v, floor);
    if peaks.binary_search(&peak_site).is_err() {
        return Err(PeakError::NotAPeak { site: peak_site });
    }
    Ok(record_for(v, &peaks, peak_site))
}

/// All peaks of `p` with their prominences, sites ascending.
pub fn peak_records(p: &OccupationProfile, floor: f64) -> Vec<PeakRecord> {
    let v = &p.populations;
    let peaks = peak_sites(v, floor);
    peaks.iter().map(|&s| record_for(v, &peaks, s)).collect()
}

fn record_for(v: &[f64], peaks: &[usize], site: usize) -> PeakRecord {
    let left = side_prominence(v, peaks, site, -1);
    let right = side_prominence(v, peaks, site, 1);
    PeakRecord {
        site,
        height: v[site],
        left_prominence: left,
        right_prominence: right,
        prominence: left.min(right),
    }
}

/// Walk from `site` in direction `dir`, accumulating the running minimum,
/// until the first strictly higher peak (excluded from the minimum) or the
/// chain end (included). Side prominence is the drop from the peak height
/// to that minimum.
fn side_prominence(v: &[f64], peaks: &[usize], site: usize, dir: isize) -> f64 {
    let h = v[site];
    let mut min = f64::INFINITY;
    let mut x = site as isize + dir;
    while x >= 0 && (x as usize) < v.len() {
        let xu = x as usize;
        if v[xu] > h && peaks.binary_search(&xu).is_ok() {
            return h - min;
        }
        min = min.min(v[xu]);
        x += dir;
    }
    h - min
}

/// Follow peaks through `traj` and score every track other than the main
/// one. The main association is pinned to the same window-argmax walk
/// that decay detection uses: each sample the walk moves to the highest
/// site within `window` of its previous position (starting from
/// `main_site`), and the detected peak nearest the walk, within `window`,
/// is the main peak of that sample. Every other peak is a side peak;
/// side peaks are associated across consecutive samples by nearest site
/// within `window`, unmatched tracks terminate, and unmatched peaks open
/// new tracks. Matching side peaks by proximity alone would let two
/// near-equal summit bumps that trade the global maximum spawn a
/// spurious full-height side track; anchoring the main track to the walk
/// keeps the summit out of the side statistics.
pub fn track_side_peaks(
    traj: &Trajectory,
    main_site: usize,
    window: usize,
) -> ProminenceReport {
    struct Live {
        last_site: usize,
        track: PeakTrack,
        birth: (usize, usize),
    }

    let mut live: Vec<Live> = Vec::new();
    let mut finished: Vec<Live> = Vec::new();
    let mut main_track: Option<PeakTrack> = None;
    let mut walk = main_site;

    for (si, sample) in traj.samples.iter().enumerate() {
        let records = peak_records(sample, DEFAULT_PEAK_FLOOR);

        // Advance the walk, leftmost on ties, exactly as the integrator's
        // decay tracker does.
        let v = &sample.populations;
        let lo = walk.saturating_sub(window);
        let hi = (walk + window + 1).min(v.len());
        let mut site = lo;
        for x in lo + 1..hi {
            if v[x] > v[site] {
                site = x;
            }
        }
        walk = site;

        // The peak standing nearest the walk is the main peak here; it is
        // excluded from side matching. Ties prefer the taller bump, then
        // the leftmost.
        let main_ri = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.site.abs_diff(walk) <= window)
            .min_by(|(_, a), (_, b)| {
                a.site
                    .abs_diff(walk)
                    .cmp(&b.site.abs_diff(walk))
                    .then(b.height.total_cmp(&a.height))
                    .then(a.site.cmp(&b.site))
            })
            .map(|(ri, _)| ri);

        // Candidate pairings sorted by distance, ties to the older track;
        // greedy acceptance gives each track and each peak one partner.
        let mut cands = Vec::new();
        for (li, lt) in live.iter().enumerate() {
            for (ri, r) in records.iter().enumerate() {
                let d = r.site.abs_diff(lt.last_site);
                if d <= window {
                    cands.push((d, li, ri));
                }
            }
        }
        cands.sort_unstable();
        let mut rec_taken = vec![false; records.len()];
        let mut live_taken = vec![false; live.len()];
        if let Some(ri) = main_ri {
            rec_taken[ri] = true;
            let r = &records[ri];
            let track = main_track.get_or_insert_with(|| PeakTrack {
                times: Vec::new(),
                prominences: Vec::new(),
                sites: Vec::new(),
                born_at_start: si == 0,
            });
            track.times.push(sample.time);
            track.prominences.push(r.prominence);
            track.sites.push(r.site);
        }
        for &(_, li, ri) in &cands {
            if live_taken[li] || rec_taken[ri] {
                continue;
            }
            live_taken[li] = true;
            rec_taken[ri] = true;
            let lt = &mut live[li];
            lt.last_site = records[ri].site;
            lt.track.times.push(sample.time);
            lt.track.prominences.push(records[ri].prominence);
            lt.track.sites.push(records[ri].site);
        }

        let mut survivors = Vec::with_capacity(live.len());
        for (li, lt) in live.into_iter().enumerate() {
            if live_taken[li] {
                survivors.push(lt);
            } else {
                finished.push(lt);
            }
        }
        live = survivors;

        for (ri, r) in records.iter().enumerate() {
            if !rec_taken[ri] {
                live.push(Live {
                    last_site: r.site,
                    track: PeakTrack {
                        times: vec![sample.time],
                        prominences: vec![r.prominence],
                        sites: vec![r.site],
                        born_at_start: si == 0,
                    },
                    birth: (si, r.site),
                });
            }
        }
    }
    finished.extend(live);
    finished.sort_by_key(|lt| lt.birth);

    let tracked_peaks: Vec<PeakTrack> = finished.into_iter().map(|lt| lt.track).collect();
    let growths: Vec<f64> = tracked_peaks.iter().map(|t| t.growth()).collect();
    let delta = growths.iter().fold(0.0_f64, |a, &b| a.max(b));

    ProminenceReport {
        tracked_peaks,
        growths,
        delta,
        reference_gamma: traj.gamma,
        main_track,
        sample_times: traj.times(),
    }
}
