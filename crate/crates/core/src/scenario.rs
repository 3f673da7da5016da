//! Scenario description: room, access points, receivers, users, groups and
//! the constraint/reward settings shared by every optimizer.
//!
//! Scenarios are read from TOML (or a JSON mirror with the same fields).
//! Users may be listed explicitly or generated from a seed; in both cases
//! the resolved scenario keeps an explicit copy of its specification, which
//! is what gets saved, so a save/load cycle reproduces the same scenario.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{self, AccessPoint, ReceiverProfile, UserState, Vec3};
use crate::error::{Error, Result};
use crate::rates::{GroupLink, NoiseModel};
use crate::seed::SeedStreams;

const DEFAULT_TOML: &str = include_str!("../scenarios/default.toml");
const SMALL_TOML: &str = include_str!("../scenarios/small.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AgentMode {
    /// One agent controls every group; action dimension Σ M_k.
    #[default]
    Joint,
    /// One agent shared by all groups; action dimension M_k, experiences pooled.
    PerGroup,
}

impl fmt::Display for AgentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentMode::Joint => "joint",
            AgentMode::PerGroup => "per-group",
        })
    }
}

impl std::str::FromStr for AgentMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(AgentMode::Joint),
            "per-group" => Ok(AgentMode::PerGroup),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    /// Length, width, height in meters.
    pub size_m: [f64; 3],
    /// Height of the receiver plane above the floor.
    pub receiver_height_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    #[serde(default = "d_pd_area")]
    pub pd_area_m2: f64,
    #[serde(default = "d_fov")]
    pub fov_deg: f64,
    #[serde(default = "one")]
    pub filter_gain: f64,
    #[serde(default = "one")]
    pub concentrator_gain: f64,
    #[serde(default = "d_responsivity")]
    pub responsivity_a_per_w: f64,
}

impl Default for ReceiverSpec {
    fn default() -> Self {
        Self {
            pd_area_m2: d_pd_area(),
            fov_deg: d_fov(),
            filter_gain: 1.0,
            concentrator_gain: 1.0,
            responsivity_a_per_w: d_responsivity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApEntry {
    pub id: usize,
    /// Horizontal position; APs sit on the ceiling.
    pub position_m: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessPointSpec {
    #[serde(default = "d_half_angle")]
    pub half_power_semi_angle_deg: f64,
    #[serde(default = "one")]
    pub transmit_power_w: f64,
    #[serde(default = "d_bandwidth")]
    pub bandwidth_hz: f64,
    /// `[columns, rows]` of a regular ceiling grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub list: Vec<ApEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub id: usize,
    /// Horizontal position; receivers sit on the receiver plane.
    pub position_m: [f64; 2],
    pub location_error_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    /// Users generated per AP footprint when no explicit list is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_ap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "d_footprint")]
    pub footprint_radius_m: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub list: Vec<UserEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma_t_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// λ in `reward = −λ·violation` for infeasible steps.
    #[serde(default = "one")]
    pub penalty_weight: f64,
    /// Average sum rate is divided by this to form the feasible reward.
    #[serde(default = "d_rate_scale")]
    pub rate_scale_bps: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            penalty_weight: 1.0,
            rate_scale_bps: d_rate_scale(),
        }
    }
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub mode: AgentMode,
    #[serde(default = "d_gamma_min")]
    pub gamma_min_bps: f64,
    #[serde(default = "d_separation")]
    pub min_separation_m: f64,
    /// Also hold cross-decoding rates to γ_min.
    #[serde(default = "d_true")]
    pub cross_rate_constraint: bool,
    #[serde(default = "d_group_size")]
    pub max_group_size: usize,
    pub room: RoomSpec,
    #[serde(default)]
    pub receiver: ReceiverSpec,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub reward: RewardConfig,
    pub access_points: AccessPointSpec,
    pub users: UserSpec,
}

fn one() -> f64 {
    1.0
}
fn d_pd_area() -> f64 {
    1e-4
}
fn d_fov() -> f64 {
    40.0
}
fn d_responsivity() -> f64 {
    0.53
}
fn d_half_angle() -> f64 {
    60.0
}
fn d_bandwidth() -> f64 {
    9e8
}
fn d_footprint() -> f64 {
    1.5
}
fn d_rate_scale() -> f64 {
    1e9
}
fn d_true() -> bool {
    true
}

fn d_gamma_min() -> f64 {
    1e8
}
fn d_separation() -> f64 {
    0.3
}
fn d_group_size() -> usize {
    4
}

/// Users served by one AP, listed by order index.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub id: usize,
    pub ap_index: usize,
    /// Indices into `Scenario::users`, element 0 has order index 1.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Explicit form of the specification; this is what `save` writes.
    pub spec: ScenarioSpec,
    pub aps: Vec<AccessPoint>,
    pub receiver: ReceiverProfile,
    pub users: Vec<UserState>,
    pub groups: Vec<Group>,
    pub noise: NoiseModel,
    pub reward: RewardConfig,
}

impl Scenario {
    /// The bundled 8-AP, 32-user scenario.
    pub fn default_scenario() -> Self {
        Self::from_toml_str(DEFAULT_TOML).expect("bundled default scenario is valid")
    }

    /// Two APs with two users each.
    pub fn small_scenario() -> Self {
        Self::from_toml_str(SMALL_TOML).expect("bundled small scenario is valid")
    }

    pub fn default_toml() -> &'static str {
        DEFAULT_TOML
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_spec(spec)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
        Self::from_spec(spec)
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.spec).expect("scenario spec serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("scenario spec serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if path.extension().is_some_and(|e| e == "json") {
            self.to_json()
        } else {
            self.to_toml()
        };
        std::fs::write(path, text)?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON spec.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.spec).expect("scenario spec serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn mode(&self) -> AgentMode {
        self.spec.mode
    }

    pub fn gamma_min(&self) -> f64 {
        self.spec.gamma_min_bps
    }

    pub fn cross_rate_constraint(&self) -> bool {
        self.spec.cross_rate_constraint
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.members.len()).collect()
    }

    pub fn height_gap(&self) -> f64 {
        self.spec.room.size_m[2] - self.spec.room.receiver_height_m
    }

    /// Largest LOS gain anywhere on the receiver plane (directly beneath an
    /// AP).
    pub fn max_los_gain(&self) -> f64 {
        self.aps
            .iter()
            .filter_map(|ap| channel::peak_gain(ap, &self.receiver, self.height_gap()).ok())
            .fold(0.0, f64::max)
    }

    /// Per-group rate evaluators with effective gains in order.
    pub fn group_links(&self) -> Result<Vec<GroupLink>> {
        self.groups
            .iter()
            .map(|g| {
                let ap = &self.aps[g.ap_index];
                let mut gains = Vec::with_capacity(g.members.len());
                for &u in &g.members {
                    let est = channel::estimate_channel(&self.users[u], ap, &self.receiver)?;
                    gains.push(est.effective_gain);
                }
                Ok(GroupLink {
                    group_id: g.id,
                    ap: ap.clone(),
                    rx: self.receiver.clone(),
                    noise: self.noise,
                    gains,
                    user_ids: g.members.iter().map(|&u| self.users[u].id).collect(),
                })
            })
            .collect()
    }

    /// Validates and resolves a specification.
    pub fn from_spec(spec: ScenarioSpec) -> Result<Self> {
        let mut spec = spec;
        validate_scalars(&spec)?;
        let room = &spec.room;
        let ceiling = room.size_m[2];
        let rx_z = room.receiver_height_m;
        let height_gap = ceiling - rx_z;

        let ap_entries = resolve_ap_entries(&spec.access_points, room)?;
        let aps: Vec<AccessPoint> = ap_entries
            .iter()
            .map(|e| AccessPoint {
                id: e.id,
                position: [e.position_m[0], e.position_m[1], ceiling],
                half_power_semi_angle: spec.access_points.half_power_semi_angle_deg.to_radians(),
                transmit_power: spec.access_points.transmit_power_w,
                bandwidth: spec.access_points.bandwidth_hz,
            })
            .collect();
        for ap in &aps {
            ap.validate()?;
        }
        let mut ids = std::collections::BTreeSet::new();
        if !aps.iter().all(|a| ids.insert(a.id)) {
            return Err(Error::Scenario("duplicate AP id".into()));
        }

        let r = &spec.receiver;
        let receiver = ReceiverProfile {
            pd_area: r.pd_area_m2,
            fov: r.fov_deg.to_radians(),
            filter_gain: r.filter_gain,
            concentrator_gain: r.concentrator_gain,
            responsivity: r.responsivity_a_per_w,
        };
        receiver.validate()?;

        let mut entries = if spec.users.list.is_empty() {
            generate_users(&spec, &aps, &receiver)?
        } else {
            spec.users.list.clone()
        };

        validate_users(&spec, &entries, &aps, &receiver, rx_z)?;
        assign_groups(&mut entries, &aps, &receiver, rx_z)?;

        let mut groups: BTreeMap<usize, Vec<&UserEntry>> = BTreeMap::new();
        for e in &entries {
            groups
                .entry(e.group.expect("assigned"))
                .or_default()
                .push(e);
        }
        let mut users = Vec::with_capacity(entries.len());
        let mut resolved_groups = Vec::with_capacity(groups.len());
        for (gid, mut members) in groups {
            let ap_index = aps
                .iter()
                .position(|a| a.id == gid)
                .ok_or_else(|| Error::Scenario(format!("group {gid} has no matching AP")))?;
            if members.len() > spec.max_group_size {
                return Err(Error::Scenario(format!(
                    "group {gid} has {} users, more than max_group_size {}",
                    members.len(),
                    spec.max_group_size
                )));
            }
            members.sort_by_key(|e| e.order.expect("assigned"));
            for (k, e) in members.iter().enumerate() {
                if e.order != Some(k + 1) {
                    return Err(Error::Scenario(format!(
                        "group {gid}: order indices must be 1..={} without gaps (user {})",
                        members.len(),
                        e.id
                    )));
                }
            }
            let ap = &aps[ap_index];
            let mut idx = Vec::with_capacity(members.len());
            for e in members {
                let position: Vec3 = [e.position_m[0], e.position_m[1], rx_z];
                let (d, _, _) = channel::link_geometry(&ap.position, &position);
                let user = UserState {
                    id: e.id,
                    position,
                    height_gap,
                    access_distance: d,
                    location_error: e.location_error_m,
                    group_id: gid,
                    order_index: e.order.unwrap(),
                };
                if channel::gain_at(ap, &receiver, &user.position)? <= 0.0 {
                    return Err(Error::Scenario(format!(
                        "user {} lies outside the field of view of its serving AP {gid}",
                        e.id
                    )));
                }
                idx.push(users.len());
                users.push(user);
            }
            resolved_groups.push(Group {
                id: gid,
                ap_index,
                members: idx,
            });
        }

        // Keep the explicit form so saving reproduces this exact scenario.
        entries.sort_by_key(|e| e.id);
        spec.users.list = entries;
        spec.users.per_ap = None;
        spec.users.seed = None;
        spec.access_points.grid = None;
        spec.access_points.list = ap_entries;

        Ok(Self {
            noise: NoiseModel {
                sigma_t: spec.noise.sigma_t_a,
            },
            reward: spec.reward,
            spec,
            aps,
            receiver,
            users,
            groups: resolved_groups,
        })
    }

    /// A scenario with the given users re-resolved under this scenario's
    /// physical settings.
    pub fn with_users(&self, users: Vec<UserEntry>) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.users.list = users;
        Self::from_spec(spec)
    }
}

fn validate_scalars(spec: &ScenarioSpec) -> Result<()> {
    let room = &spec.room;
    if room.size_m.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Scenario("room dimensions must be positive".into()));
    }
    if !(room.receiver_height_m >= 0.0 && room.receiver_height_m < room.size_m[2]) {
        return Err(Error::Scenario(
            "receiver plane must lie below the ceiling".into(),
        ));
    }
    if !(spec.noise.sigma_t_a > 0.0) {
        return Err(Error::Scenario("noise.sigma_t_a must be positive".into()));
    }
    if !(spec.gamma_min_bps >= 0.0) {
        return Err(Error::Scenario("gamma_min_bps must be non-negative".into()));
    }
    if !(spec.min_separation_m >= 0.0) {
        return Err(Error::Scenario(
            "min_separation_m must be non-negative".into(),
        ));
    }
    if !(spec.reward.penalty_weight >= 0.0) || !(spec.reward.rate_scale_bps > 0.0) {
        return Err(Error::Scenario(
            "reward: penalty_weight >= 0 and rate_scale_bps > 0 required".into(),
        ));
    }
    if spec.max_group_size == 0 {
        return Err(Error::Scenario("max_group_size must be at least 1".into()));
    }
    Ok(())
}

fn resolve_ap_entries(spec: &AccessPointSpec, room: &RoomSpec) -> Result<Vec<ApEntry>> {
    match (&spec.grid, spec.list.is_empty()) {
        (Some(_), false) => Err(Error::Scenario(
            "give either access_points.grid or access_points.list".into(),
        )),
        (Some([cols, rows]), true) => {
            if *cols == 0 || *rows == 0 {
                return Err(Error::Scenario(
                    "AP grid needs at least one row and column".into(),
                ));
            }
            let dx = room.size_m[0] / *cols as f64;
            let dy = room.size_m[1] / *rows as f64;
            let mut out = Vec::with_capacity(cols * rows);
            for r in 0..*rows {
                for c in 0..*cols {
                    out.push(ApEntry {
                        id: out.len(),
                        position_m: [(c as f64 + 0.5) * dx, (r as f64 + 0.5) * dy],
                    });
                }
            }
            Ok(out)
        }
        (None, false) => Ok(spec.list.clone()),
        (None, true) => Err(Error::Scenario("no access points".into())),
    }
}

fn horizontal_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Location-error draw: uniform in [0.05, 0.4] m, +0.1 m within 1 m of a wall.
fn sample_location_error<R: Rng + ?Sized>(p: [f64; 2], room: &RoomSpec, rng: &mut R) -> f64 {
    let wall = p[0]
        .min(room.size_m[0] - p[0])
        .min(p[1])
        .min(room.size_m[1] - p[1]);
    let base = rng.random_range(0.05..=0.4);
    if wall < 1.0 {
        base + 0.1
    } else {
        base
    }
}

fn generate_users(
    spec: &ScenarioSpec,
    aps: &[AccessPoint],
    rx: &ReceiverProfile,
) -> Result<Vec<UserEntry>> {
    let per_ap = spec
        .users
        .per_ap
        .ok_or_else(|| Error::Scenario("users need either `list` or `per_ap`".into()))?;
    let seed = spec.users.seed.unwrap_or(0);
    let mut rng = SeedStreams::new(seed).stream("scenario-gen");
    let room = &spec.room;
    let rx_z = room.receiver_height_m;
    let radius = spec.users.footprint_radius_m;
    let mut placed: Vec<UserEntry> = Vec::new();
    for (k, ap) in aps.iter().enumerate() {
        let centre = [ap.position[0], ap.position[1]];
        let mut count = 0;
        let mut attempts = 0;
        while count < per_ap {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::Scenario(format!(
                    "could not place {per_ap} users around AP {} with the separation constraint",
                    ap.id
                )));
            }
            let dx = rng.random_range(-radius..=radius);
            let dy = rng.random_range(-radius..=radius);
            if dx * dx + dy * dy > radius * radius {
                continue;
            }
            let p = [centre[0] + dx, centre[1] + dy];
            if p[0] < 0.0 || p[1] < 0.0 || p[0] > room.size_m[0] || p[1] > room.size_m[1] {
                continue;
            }
            // Stay inside this AP's cell.
            let own = horizontal_distance(p, centre);
            let closer = aps.iter().enumerate().any(|(j, a)| {
                j != k && horizontal_distance(p, [a.position[0], a.position[1]]) < own
            });
            if closer {
                continue;
            }
            if channel::gain_at(ap, rx, &[p[0], p[1], rx_z])? <= 0.0 {
                continue;
            }
            if placed
                .iter()
                .any(|u| horizontal_distance(u.position_m, p) < spec.min_separation_m)
            {
                continue;
            }
            let location_error_m = sample_location_error(p, room, &mut rng);
            placed.push(UserEntry {
                id: placed.len(),
                position_m: p,
                location_error_m,
                group: Some(ap.id),
                order: None,
            });
            count += 1;
        }
    }
    Ok(placed)
}

fn validate_users(
    spec: &ScenarioSpec,
    users: &[UserEntry],
    aps: &[AccessPoint],
    rx: &ReceiverProfile,
    rx_z: f64,
) -> Result<()> {
    if users.is_empty() {
        return Err(Error::Scenario("no users".into()));
    }
    let mut ids = std::collections::BTreeSet::new();
    let room = &spec.room;
    for u in users {
        if !ids.insert(u.id) {
            return Err(Error::Scenario(format!("duplicate user id {}", u.id)));
        }
        let [x, y] = u.position_m;
        if !(x >= 0.0 && y >= 0.0 && x <= room.size_m[0] && y <= room.size_m[1]) {
            return Err(Error::Scenario(format!(
                "user {} lies outside the room",
                u.id
            )));
        }
        if !(u.location_error_m >= 0.0) {
            return Err(Error::Scenario(format!(
                "user {}: location error must be non-negative",
                u.id
            )));
        }
        let mut covered = false;
        for ap in aps {
            if channel::gain_at(ap, rx, &[x, y, rx_z])? > 0.0 {
                covered = true;
                break;
            }
        }
        if !covered {
            return Err(Error::Scenario(format!(
                "user {} is outside every AP field of view",
                u.id
            )));
        }
    }
    for (i, a) in users.iter().enumerate() {
        for b in &users[i + 1..] {
            let d = horizontal_distance(a.position_m, b.position_m);
            if d < spec.min_separation_m {
                return Err(Error::Scenario(format!(
                    "users {} and {} are {d:.3} m apart, below the {} m minimum separation",
                    a.id, b.id, spec.min_separation_m
                )));
            }
        }
    }
    Ok(())
}

/// Fills in missing groups (strongest AP) and orders (descending effective
/// gain, order 1 strongest).
fn assign_groups(
    users: &mut [UserEntry],
    aps: &[AccessPoint],
    rx: &ReceiverProfile,
    rx_z: f64,
) -> Result<()> {
    let height_gap = aps.first().map(|a| a.position[2] - rx_z).unwrap_or(0.0);
    let effective = |u: &UserEntry, ap: &AccessPoint| -> Result<f64> {
        let position = [u.position_m[0], u.position_m[1], rx_z];
        let (d, _, _) = channel::link_geometry(&ap.position, &position);
        let state = UserState {
            id: u.id,
            position,
            height_gap,
            access_distance: d,
            location_error: u.location_error_m,
            group_id: ap.id,
            order_index: 1,
        };
        Ok(channel::estimate_channel(&state, ap, rx)?.effective_gain)
    };
    for u in users.iter_mut() {
        if u.group.is_none() {
            let mut best = (f64::NEG_INFINITY, 0);
            for ap in aps {
                let g = effective(u, ap)?;
                if g > best.0 {
                    best = (g, ap.id);
                }
            }
            u.group = Some(best.1);
        }
    }
    let group_ids: std::collections::BTreeSet<usize> =
        users.iter().filter_map(|u| u.group).collect();
    for gid in group_ids {
        let ap = aps
            .iter()
            .find(|a| a.id == gid)
            .ok_or_else(|| Error::Scenario(format!("group {gid} has no matching AP")))?;
        let members: Vec<usize> = (0..users.len())
            .filter(|&i| users[i].group == Some(gid))
            .collect();
        let explicit = members
            .iter()
            .filter(|&&i| users[i].order.is_some())
            .count();
        if explicit == members.len() {
            continue;
        }
        if explicit != 0 {
            return Err(Error::Scenario(format!(
                "group {gid}: give order for all users or none"
            )));
        }
        let mut ranked = Vec::with_capacity(members.len());
        for &i in &members {
            ranked.push((effective(&users[i], ap)?, users[i].id, i));
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (k, (_, _, i)) in ranked.into_iter().enumerate() {
            users[i].order = Some(k + 1);
        }
    }
    Ok(())
}
