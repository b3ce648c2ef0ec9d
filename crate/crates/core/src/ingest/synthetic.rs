//! Desk-scale synthetic corpora with planted anomalies.
//!
//! Normal traffic is a random concatenation of workflows (fixed template
//! sequences), which gives every line a recurring context. Anomalies are
//! planted as follows:
//!
//! * template: a line from a skeleton that never appears in normal traffic;
//! * attribute: a normal skeleton with one slot filled from an abnormal-only pool;
//! * contextual: an out-of-place normal line (the intruder) is inserted, and the
//!   `context_span` lines that follow it, whose preceding window now contains
//!   the intruder, are labeled abnormal. The intruder itself stays normal.
//!
//! Root-cause incidents emit bursts of cause lines from a cause-specific set of
//! services, followed by a failure event.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LogMessage, Truth};
use crate::math;
use crate::parse::tokenize;
use crate::weaklabel::FailureEvent;
use crate::{Error, Result};

const EPOCH_MS: i64 = 1_700_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    Template,
    Attribute,
    Contextual,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 3] = [AnomalyKind::Template, AnomalyKind::Attribute, AnomalyKind::Contextual];

    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::Template => "template",
            AnomalyKind::Attribute => "attribute",
            AnomalyKind::Contextual => "contextual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Values a slot may take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotPool {
    pub normal: Vec<String>,
    #[serde(default)]
    pub abnormal: Vec<String>,
}

/// A message skeleton: `text` with one `{}` marker per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub text: String,
    #[serde(default)]
    pub slots: Vec<SlotPool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindMix {
    pub template: f64,
    pub attribute: f64,
    pub contextual: f64,
}

impl KindMix {
    pub fn only(kind: AnomalyKind) -> Self {
        let mut mix = KindMix { template: 0.0, attribute: 0.0, contextual: 0.0 };
        match kind {
            AnomalyKind::Template => mix.template = 1.0,
            AnomalyKind::Attribute => mix.attribute = 1.0,
            AnomalyKind::Contextual => mix.contextual = 1.0,
        }
        mix
    }
}

/// A planted root cause: the services it originates from and the lines it emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseSpec {
    pub services: Vec<String>,
    pub skeletons: Vec<SkeletonSpec>,
    pub lines_per_incident: usize,
    /// Relative frequency among incidents.
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_lines: usize,
    /// Normal skeletons.
    pub vocab: Vec<SkeletonSpec>,
    /// Template sequences over `vocab`; empty means one workflow over the whole vocab.
    #[serde(default)]
    pub workflows: Vec<Vec<usize>>,
    /// Skeletons that only ever appear in template anomalies.
    #[serde(default)]
    pub abnormal_vocab: Vec<SkeletonSpec>,
    pub anomaly_rate: f64,
    pub mix: KindMix,
    /// Number of lines after an intruder labeled as contextual anomalies.
    #[serde(default = "default_span")]
    pub context_span: usize,
    /// Services emitting normal traffic and point anomalies.
    pub services: Vec<String>,
    #[serde(default)]
    pub causes: Vec<CauseSpec>,
    #[serde(default)]
    pub incidents: usize,
    pub base_period_ms: f64,
    pub seed: u64,
}

fn default_span() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: u64,
    pub kind: AnomalyKind,
}

/// Every planted anomalous line with its kind, in index order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub entries: Vec<ManifestEntry>,
}

impl GroundTruthManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub messages: Vec<LogMessage>,
    pub manifest: GroundTruthManifest,
    /// Planted failure times: one per point anomaly, contextual intruder and incident.
    pub failures: Vec<FailureEvent>,
    /// Incident cause lines: `(index, cause id)`.
    pub cause_lines: Vec<(u64, usize)>,
}

impl SyntheticSpec {
    fn workflows(&self) -> Vec<Vec<usize>> {
        if self.workflows.is_empty() {
            vec![(0..self.vocab.len()).collect()]
        } else {
            self.workflows.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSynthetic(m.to_string()));
        if !(0.0..=1.0).contains(&self.anomaly_rate) {
            return bad("anomaly_rate must lie in [0, 1]");
        }
        let m = self.mix;
        if m.template < 0.0 || m.attribute < 0.0 || m.contextual < 0.0 {
            return bad("mix fractions must be non-negative");
        }
        if ((m.template + m.attribute + m.contextual) - 1.0).abs() > 1e-9 {
            return bad("mix fractions must sum to 1");
        }
        if self.vocab.is_empty() {
            return bad("vocab is empty");
        }
        if self.services.is_empty() {
            return bad("at least one service is required");
        }
        if !(self.base_period_ms > 0.0) {
            return bad("base_period_ms must be positive");
        }
        for wf in &self.workflows {
            if wf.is_empty() || wf.iter().any(|&t| t >= self.vocab.len()) {
                return bad("workflow refers to unknown skeletons");
            }
        }
        for sk in self.vocab.iter().chain(&self.abnormal_vocab).chain(self.causes.iter().flat_map(|c| &c.skeletons)) {
            check_skeleton(sk)?;
        }
        if self.anomaly_rate > 0.0 {
            if m.template > 0.0 && self.abnormal_vocab.is_empty() {
                return bad("template anomalies requested but abnormal_vocab is empty");
            }
            if m.attribute > 0.0 && self.attribute_candidates().is_empty() {
                return bad("attribute anomalies requested but no skeleton has a slot with abnormal values");
            }
            if m.contextual > 0.0 && self.workflows().len() < 2 {
                return bad("contextual anomalies need at least two workflows");
            }
        }
        for c in &self.causes {
            if c.services.is_empty() || c.skeletons.is_empty() || c.lines_per_incident == 0 || !(c.weight > 0.0) {
                return bad("each cause needs services, skeletons, a positive line count and weight");
            }
        }
        if self.incidents > 0 && self.causes.is_empty() {
            return bad("incidents requested without causes");
        }
        Ok(())
    }

    fn attribute_candidates(&self) -> Vec<usize> {
        (0..self.vocab.len())
            .filter(|&i| self.vocab[i].slots.iter().any(|s| !s.abnormal.is_empty()))
            .collect()
    }
}

fn check_skeleton(sk: &SkeletonSpec) -> Result<()> {
    let markers = sk.text.matches("{}").count();
    if markers != sk.slots.len() {
        return Err(Error::InvalidSynthetic(format!(
            "skeleton {:?} has {} markers but {} slots",
            sk.text,
            markers,
            sk.slots.len()
        )));
    }
    for slot in &sk.slots {
        if slot.normal.is_empty() {
            return Err(Error::InvalidSynthetic(format!("skeleton {:?} has an empty slot pool", sk.text)));
        }
        for v in slot.normal.iter().chain(&slot.abnormal) {
            if tokenize(v).len() != 1 {
                return Err(Error::InvalidSynthetic(format!("slot value {:?} is not a single token", v)));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum SlotMode {
    Normal,
    /// Fill this slot from the abnormal pool.
    Abnormal(usize),
}

fn render(sk: &SkeletonSpec, mode: SlotMode, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(sk.text.len() + 16);
    let mut parts = sk.text.split("{}");
    out.push_str(parts.next().unwrap_or(""));
    for (i, part) in parts.enumerate() {
        let pool = &sk.slots[i];
        let values = match mode {
            SlotMode::Abnormal(j) if j == i => &pool.abnormal,
            _ => &pool.normal,
        };
        out.push_str(values.choose(rng).expect("validated non-empty pool"));
        out.push_str(part);
    }
    out
}

/// Infinite stream of normal template ids with lookahead.
struct NormalStream {
    workflows: Vec<Vec<usize>>,
    /// `(template, workflow)` pairs not yet consumed.
    queue: VecDeque<(usize, usize)>,
}

impl NormalStream {
    fn ensure(&mut self, n: usize, rng: &mut ChaCha8Rng) {
        while self.queue.len() < n {
            let w = rng.gen_range(0..self.workflows.len());
            for &t in &self.workflows[w] {
                self.queue.push_back((t, w));
            }
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> (usize, usize) {
        self.ensure(1, rng);
        self.queue.pop_front().unwrap()
    }
}

enum Planned {
    Normal,
    Template,
    Attribute,
    Intruder,
}

/// Generates a corpus of exactly `spec.n_lines` messages. Identical specs
/// (including the seed) give identical output.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let workflows = spec.workflows();
    let attr_candidates = spec.attribute_candidates();
    let mut stream = NormalStream { workflows: workflows.clone(), queue: VecDeque::new() };
    // Workflow boundary templates are never intruders: a boundary element next to
    // another workflow's head or tail reproduces a normal context set.
    let mut boundary = vec![false; spec.vocab.len()];
    for wf in &workflows {
        boundary[wf[0]] = true;
        boundary[*wf.last().unwrap()] = true;
    }

    let n = spec.n_lines;
    let span = spec.context_span.max(1);
    let rate = spec.anomaly_rate;
    let p_point = rate * (spec.mix.template + spec.mix.attribute);
    let p_template = if p_point > 0.0 { rate * spec.mix.template / p_point } else { 0.0 };
    let p_event = rate * spec.mix.contextual / span as f64;

    // Incident start slots, evenly spread with jitter; the burst occupies
    // `2 * lines_per_incident` slots.
    let mut incident_starts: VecDeque<(usize, usize)> = VecDeque::new();
    if spec.incidents > 0 {
        let total_w: f64 = spec.causes.iter().map(|c| c.weight).sum();
        let stride = n as f64 / spec.incidents as f64;
        for k in 0..spec.incidents {
            let mut pick = rng.gen::<f64>() * total_w;
            let mut cause = spec.causes.len() - 1;
            for (ci, c) in spec.causes.iter().enumerate() {
                if pick < c.weight {
                    cause = ci;
                    break;
                }
                pick -= c.weight;
            }
            let jitter = (rng.gen::<f64>() - 0.5) * stride * 0.5;
            let start = ((k as f64 + 0.5) * stride + jitter).max(0.0) as usize;
            incident_starts.push_back((start, cause));
        }
    }

    let mut messages: Vec<LogMessage> = Vec::with_capacity(n);
    let mut manifest = Vec::new();
    let mut failures = Vec::new();
    let mut cause_lines = Vec::new();
    let mut t = EPOCH_MS;
    let mut contextual_left = 0usize;
    // Recent normal-stream templates, for intruder selection.
    let mut recent: VecDeque<usize> = VecDeque::new();
    let mut recent_wf: VecDeque<usize> = VecDeque::new();

    while messages.len() < n {
        let pos = messages.len();
        let gap = -math::ln(1.0 - rng.gen::<f64>()) * spec.base_period_ms;
        t += math::round(gap) as i64;

        if let Some(&(start, cause)) = incident_starts.front() {
            if pos >= start {
                incident_starts.pop_front();
                let c = &spec.causes[cause];
                let mut last = t;
                for k in 0..c.lines_per_incident {
                    if messages.len() >= n {
                        break;
                    }
                    if k > 0 {
                        let gap = -math::ln(1.0 - rng.gen::<f64>()) * spec.base_period_ms;
                        t += math::round(gap) as i64;
                        // interleave one normal line between cause lines
                        let (tid, w) = stream.next(&mut rng);
                        push_recent(&mut recent, &mut recent_wf, tid, w, span);
                        let content = render(&spec.vocab[tid], SlotMode::Normal, &mut rng);
                        let source = spec.services.choose(&mut rng).unwrap().clone();
                        push_line(&mut messages, t, source, content, false);
                        if messages.len() >= n {
                            break;
                        }
                        let gap = -math::ln(1.0 - rng.gen::<f64>()) * spec.base_period_ms;
                        t += math::round(gap) as i64;
                    }
                    let sk = c.skeletons.choose(&mut rng).unwrap();
                    let content = render(sk, SlotMode::Normal, &mut rng);
                    let source = c.services.choose(&mut rng).unwrap().clone();
                    let index = push_line(&mut messages, t, source, content, true);
                    manifest.push(ManifestEntry { index, kind: AnomalyKind::Template });
                    cause_lines.push((index, cause));
                    last = t;
                }
                failures.push(FailureEvent { timestamp_ms: last + 1, tag: Some(format!("cause-{}", cause)) });
                continue;
            }
        }

        let planned = if rng.gen::<f64>() < p_point {
            if rng.gen::<f64>() < p_template {
                Planned::Template
            } else {
                Planned::Attribute
            }
        } else if contextual_left == 0 && rng.gen::<f64>() < p_event {
            Planned::Intruder
        } else {
            Planned::Normal
        };

        let (content, abnormal, kind, service) = match planned {
            Planned::Template => {
                let sk = spec.abnormal_vocab.choose(&mut rng).unwrap();
                (render(sk, SlotMode::Normal, &mut rng), true, Some(AnomalyKind::Template), None)
            }
            Planned::Attribute => {
                let sk = &spec.vocab[*attr_candidates.choose(&mut rng).unwrap()];
                let slots: Vec<usize> = (0..sk.slots.len()).filter(|&i| !sk.slots[i].abnormal.is_empty()).collect();
                let slot = *slots.choose(&mut rng).unwrap();
                (render(sk, SlotMode::Abnormal(slot), &mut rng), true, Some(AnomalyKind::Attribute), None)
            }
            Planned::Intruder => {
                stream.ensure(span, &mut rng);
                let mut near_wf: Vec<usize> = recent_wf.iter().copied().collect();
                near_wf.extend(stream.queue.iter().take(span).map(|&(_, w)| w));
                let mut near_t: Vec<usize> = recent.iter().copied().collect();
                near_t.extend(stream.queue.iter().take(span).map(|&(t, _)| t));
                let mut candidates: Vec<usize> = Vec::new();
                for (wi, wf) in workflows.iter().enumerate() {
                    if near_wf.contains(&wi) {
                        continue;
                    }
                    candidates.extend(wf.iter().copied().filter(|&t| !boundary[t] && !near_t.contains(&t)));
                }
                if candidates.is_empty() {
                    candidates = (0..spec.vocab.len()).filter(|&t| !boundary[t] && !near_t.contains(&t)).collect();
                }
                candidates.sort_unstable();
                candidates.dedup();
                match candidates.choose(&mut rng) {
                    Some(&tid) => {
                        contextual_left = span;
                        failures.push(FailureEvent { timestamp_ms: t, tag: Some("contextual".to_string()) });
                        (render(&spec.vocab[tid], SlotMode::Normal, &mut rng), false, None, None)
                    }
                    None => {
                        let (tid, w) = stream.next(&mut rng);
                        push_recent(&mut recent, &mut recent_wf, tid, w, span);
                        (render(&spec.vocab[tid], SlotMode::Normal, &mut rng), false, None, None)
                    }
                }
            }
            Planned::Normal => {
                let (tid, w) = stream.next(&mut rng);
                push_recent(&mut recent, &mut recent_wf, tid, w, span);
                let content = render(&spec.vocab[tid], SlotMode::Normal, &mut rng);
                if contextual_left > 0 {
                    contextual_left -= 1;
                    (content, true, Some(AnomalyKind::Contextual), None)
                } else {
                    (content, false, None, None::<String>)
                }
            }
        };
        let source = service.unwrap_or_else(|| spec.services.choose(&mut rng).unwrap().clone());
        let index = push_line(&mut messages, t, source, content, abnormal);
        if let Some(kind) = kind {
            manifest.push(ManifestEntry { index, kind });
            if kind != AnomalyKind::Contextual {
                failures.push(FailureEvent { timestamp_ms: t, tag: Some(kind.as_str().to_string()) });
            }
        }
    }

    Ok(SyntheticCorpus { messages, manifest: GroundTruthManifest { entries: manifest }, failures, cause_lines })
}

fn push_recent(recent: &mut VecDeque<usize>, recent_wf: &mut VecDeque<usize>, t: usize, w: usize, span: usize) {
    recent.push_back(t);
    recent_wf.push_back(w);
    while recent.len() > span {
        recent.pop_front();
        recent_wf.pop_front();
    }
}

fn push_line(messages: &mut Vec<LogMessage>, t: i64, source: String, content: String, abnormal: bool) -> u64 {
    let index = messages.len() as u64;
    let truth = if abnormal { Truth::Abnormal } else { Truth::Normal };
    messages.push(LogMessage { index, timestamp_ms: t, source, content, truth: Some(truth) });
    index
}

fn pool(values: &[&str]) -> Vec<String> {
    values.iter().map(|s| s.to_string()).collect()
}

fn skel(text: &str, slots: Vec<SlotPool>) -> SkeletonSpec {
    SkeletonSpec { text: text.to_string(), slots }
}

fn normal_only(values: Vec<String>) -> SlotPool {
    SlotPool { normal: values, abnormal: Vec::new() }
}

/// The built-in corpus: four workflows of twelve skeletons each over sixteen
/// services, eight abnormal-only skeletons, and two slot kinds carrying
/// abnormal-only values.
pub fn default_spec(n_lines: usize, anomaly_rate: f64, mix: KindMix, seed: u64) -> SyntheticSpec {
    let nodes: Vec<String> = (1..=40).map(|i| format!("wally{:03}", i)).collect();
    let users = pool(&["root", "alice", "bob", "carol", "dave", "erin", "mallory", "trent"]);
    let jobs: Vec<String> = (0..30).map(|i| format!("{}", 1000 + i * 37)).collect();
    let small: Vec<String> = (1..=9).map(|i| format!("{}", i)).collect();
    let ms: Vec<String> = (0..20).map(|i| format!("{}", 12 + i * 13)).collect();
    let addrs: Vec<String> = (0..16).map(|i| format!("0x{:08x}", 0x1000_0000u32 + i * 0x1f40)).collect();
    let ports: Vec<String> = (0..10).map(|i| format!("{}", 8000 + i)).collect();
    let files = pool(&["passwd", "hosts", "fstab", "motd", "resolv", "crontab", "profile", "exports"]);
    let state = SlotPool {
        normal: pool(&["ok", "ready", "idle", "running", "active"]),
        abnormal: pool(&["corrupted", "panicked", "unreachable", "degraded"]),
    };
    let result = SlotPool {
        normal: pool(&["success", "done", "completed", "accepted"]),
        abnormal: pool(&["failure", "aborted", "denied", "crashed"]),
    };
    let node = || normal_only(nodes.clone());
    let user = || normal_only(users.clone());
    let job = || normal_only(jobs.clone());
    let num = || normal_only(small.clone());
    let dur = || normal_only(ms.clone());
    let addr = || normal_only(addrs.clone());
    let port = || normal_only(ports.clone());
    let file = || normal_only(files.clone());

    let vocab = vec![
        // workflow 0: batch job lifecycle
        skel("pbsserver: job {} queued by user {}", vec![job(), user()]),
        skel("scheduler: job {} assigned to node {}", vec![job(), node()]),
        skel("pbsmom: starting job {} on node {}", vec![job(), node()]),
        skel("prologue: environment for job {} is {}", vec![job(), state.clone()]),
        skel("mpirun: launched {} ranks for job {}", vec![num(), job()]),
        skel("lustre: client mounted scratch on node {}", vec![node()]),
        skel("epilogue: job {} finished with status {}", vec![job(), result.clone()]),
        skel("accounting: job {} used {} cpu seconds", vec![job(), dur()]),
        skel("pbsmom: cleaning up spool for job {}", vec![job()]),
        skel("scheduler: node {} returned to pool", vec![node()]),
        skel("pbsserver: mail sent to user {} about job {}", vec![user(), job()]),
        skel("joblog: record written for job {}", vec![job()]),
        // workflow 1: remote login session
        skel("sshd: connection from node {} port {}", vec![node(), port()]),
        skel("pam: authentication for user {} returned {}", vec![user(), result.clone()]),
        skel("sshd: session opened for user {}", vec![user()]),
        skel("systemd: started session {} of user {}", vec![num(), user()]),
        skel("bash: user {} changed directory", vec![user()]),
        skel("sudo: user {} ran command as root", vec![user()]),
        skel("audit: file {} read by user {}", vec![file(), user()]),
        skel("rsync: transferred {} files for user {}", vec![num(), user()]),
        skel("sshd: received disconnect from node {}", vec![node()]),
        skel("pam: session closed for user {}", vec![user()]),
        skel("systemd: removed session {}", vec![num()]),
        skel("logind: seat released on node {}", vec![node()]),
        // workflow 2: periodic maintenance
        skel("crond: running hourly tasks on node {}", vec![node()]),
        skel("logrotate: rotated file {}", vec![file()]),
        skel("ntpd: clock offset {} ms on node {}", vec![dur(), node()]),
        skel("smartd: disk check on node {} is {}", vec![node(), state.clone()]),
        skel("updatedb: indexed {} directories", vec![dur()]),
        skel("backup: snapshot of file {} is {}", vec![file(), result.clone()]),
        skel("tmpwatch: removed {} stale entries", vec![num()]),
        skel("mcelog: scanned memory at {} on node {}", vec![addr(), node()]),
        skel("gmond: metrics published on port {}", vec![port()]),
        skel("puppet: catalog applied in {} ms", vec![dur()]),
        skel("auditd: rules reloaded on node {}", vec![node()]),
        skel("anacron: hourly cycle complete on node {}", vec![node()]),
        // workflow 3: network service traffic
        skel("dhcpd: lease offered to node {}", vec![node()]),
        skel("named: query for node {} answered in {} ms", vec![node(), dur()]),
        skel("nfsd: export mounted by node {}", vec![node()]),
        skel("portmap: registered program on port {}", vec![port()]),
        skel("ypserv: map lookup by user {} was {}", vec![user(), result.clone()]),
        skel("httpd: request from node {} served in {} ms", vec![node(), dur()]),
        skel("kernel: page mapped at {} for pid {}", vec![addr(), job()]),
        skel("postfix: message queued for user {}", vec![user()]),
        skel("postfix: delivery to user {} status {}", vec![user(), result.clone()]),
        skel("ifup: interface on node {} is {}", vec![node(), state.clone()]),
        skel("xinetd: service on port {} exited", vec![port()]),
        skel("dhclient: lease renewed for node {}", vec![node()]),
    ];
    let workflows = (0..4).map(|w| (w * 12..w * 12 + 12).collect()).collect();
    let abnormal_vocab = vec![
        skel("kpanic: kernel panic on node {} code {}", vec![node(), num()]),
        skel("ecc: uncorrectable memory error at {} on node {}", vec![addr(), node()]),
        skel("lnet: lost connection to server {} after {} ms", vec![node(), dur()]),
        skel("oomkiller: killed job {} out of memory", vec![job()]),
        skel("ext3fs: filesystem remounted read only on node {}", vec![node()]),
        skel("raid: disk {} failed in array {}", vec![num(), num()]),
        skel("ibswitch: link down on port {} of switch {}", vec![port(), node()]),
        skel("thermal: cpu {} temperature critical on node {}", vec![num(), node()]),
    ];
    let services = (1..=16).map(|i| format!("app{:02}", i)).collect();
    SyntheticSpec {
        n_lines,
        vocab,
        workflows,
        abnormal_vocab,
        anomaly_rate,
        mix,
        context_span: 10,
        services,
        causes: Vec::new(),
        incidents: 0,
        base_period_ms: 200.0,
        seed,
    }
}

/// The built-in corpus plus three root causes with disjoint service sets.
pub fn rca_spec(n_lines: usize, incidents: usize, seed: u64) -> SyntheticSpec {
    let mut spec = default_spec(n_lines, 0.0, KindMix::only(AnomalyKind::Template), seed);
    let nodes: Vec<String> = (1..=40).map(|i| format!("wally{:03}", i)).collect();
    let node = || normal_only(nodes.clone());
    let codes = || normal_only((1..=9).map(|i| format!("{}", i)).collect());
    spec.causes = vec![
        CauseSpec {
            services: pool(&["db01", "db02"]),
            skeletons: vec![
                skel("postgres: checkpoint stalled on node {}", vec![node()]),
                skel("pgpool: replica lag exceeded on node {}", vec![node()]),
            ],
            lines_per_incident: 6,
            weight: 3.0,
        },
        CauseSpec {
            services: pool(&["net01", "net02", "net03"]),
            skeletons: vec![
                skel("bonding: slave link flapping on node {}", vec![node()]),
                skel("arpwatch: address conflict code {}", vec![codes()]),
            ],
            lines_per_incident: 6,
            weight: 2.0,
        },
        CauseSpec {
            services: pool(&["stor01", "stor02"]),
            skeletons: vec![
                skel("multipathd: path failed on node {}", vec![node()]),
                skel("scsi: device reset code {}", vec![codes()]),
            ],
            lines_per_incident: 6,
            weight: 1.0,
        },
    ];
    spec.incidents = incidents;
    spec.base_period_ms = 100.0;
    spec
}
