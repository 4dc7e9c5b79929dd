//! Desk-scale scenarios.
//!
//! Every scenario is written as configuration text and parsed, so the
//! library exercises the same path as a user config file.

use crate::config::{parse_scenario_str, ScenarioConfig};

fn build(text: &str) -> ScenarioConfig {
    parse_scenario_str(text, &[]).expect("library scenario is valid")
}

fn repeat(item: &str, n: usize) -> String {
    vec![item; n].join(", ")
}

/// Free Gaussian without localization; the width follows the textbook law.
pub fn free_gaussian() -> ScenarioConfig {
    build(
        r#"
name = "free-gaussian"

[grid]
particles = 1
points = 512
box_length = 64.0

[[initial.branches]]
amplitude = 1.0
packets = [{ center = 0.0, width = 1.0 }]

[initial]
positions = [0.3]

[collapse]
gamma_L = 0.0
a_L = 1.0

[time]
dt = 0.005
duration = 2.0
"#,
    )
}

/// Moving packet with `a_L` ten times the box: the localization term is a
/// near-constant gain and drops out of the normalized evolution.
pub fn wide_localization(gamma_l: f64) -> ScenarioConfig {
    build(&format!(
        r#"
name = "wide-localization"

[grid]
particles = 1
points = 16384
box_length = 4096.0

[[initial.branches]]
amplitude = 1.0
packets = [{{ center = 0.0, width = 1.0, momentum = 0.5 }}]

[initial]
positions = [0.7]

[collapse]
gamma_L = {gamma_l:?}
a_L = 40960.0
renormalize_each_step = true

[time]
dt = 0.005
duration = 2.0
record_stride = 40
"#
    ))
}

/// Two far-apart branches with the position frozen inside the left one.
/// `a_L` is large next to the packet width, so each branch sees a nearly
/// flat `Λ` and the weight ratio follows `exp(2 γ_L ΔΛ t)`.
pub fn branch_dominance() -> ScenarioConfig {
    build(
        r#"
name = "branch-dominance"

[grid]
particles = 1
points = 131072
box_length = 32768.0

[[initial.branches]]
amplitude = 1.0
packets = [{ center = -8000.0, width = 1.0 }]

[[initial.branches]]
amplitude = 1.0
packets = [{ center = 8000.0, width = 1.0 }]

[initial]
positions = [-8000.0]

[bohmian]
freeze = true

[collapse]
gamma_L = 5.0
a_L = 8000.0

[time]
dt = 0.01
duration = 1.02

[[branches]]
name = "occupied"
region = [[-16384.0, 0.0]]

[[branches]]
name = "empty"
region = [[0.0, 16384.0]]
"#,
    )
}

/// `ΔΛ` of [`branch_dominance`]: one for the occupied branch, `exp(-4)` for
/// the empty one at distance `2 a_L`.
pub fn branch_dominance_delta_lambda() -> f64 {
    1.0 - (-4.0f64).exp()
}

/// Two-well superposition with the position in the left packet; the packets
/// match the well ground-state width.
pub fn collapse_rate() -> ScenarioConfig {
    build(
        r#"
name = "collapse-rate"

[grid]
particles = 1
points = 256
box_length = 32.0

[potential]
kind = "double_well"
barrier = 0.125
separation = 16.0

[[initial.branches]]
amplitude = 1.0
packets = [{ center = -8.0, width = 2.0 }]

[[initial.branches]]
amplitude = 1.0
packets = [{ center = 8.0, width = 2.0 }]

[initial]
positions = [-7.0]

[collapse]
gamma_L = 0.5
a_L = 2.0

[time]
dt = 0.005
duration = 10.0
record_stride = 20

[[branches]]
name = "occupied"
region = [[-16.0, 0.0]]

[[branches]]
name = "empty"
region = [[0.0, 16.0]]
"#,
    )
}

/// `n` particles that are all left or all right, with every position at the
/// left well.
pub fn clustered(n: usize) -> ScenarioConfig {
    let packet = |c: f64| format!("{{ center = {c:?}, width = 1.0 }}");
    build(&format!(
        r#"
name = "clustered-{n}"

[grid]
particles = {n}
points = 128
box_length = 32.0

[potential]
kind = "double_well"
barrier = 2.0
separation = 16.0

[[initial.branches]]
amplitude = 1.0
packets = [{left}]

[[initial.branches]]
amplitude = 1.0
packets = [{right}]

[initial]
positions = [{positions}]

[collapse]
gamma_L = 0.5
a_L = 4.0

[time]
dt = 0.005
duration = 4.0
record_stride = 10

[[branches]]
name = "occupied"
region = [{occupied}]

[[branches]]
name = "empty"
region = [{empty}]
"#,
        left = repeat(&packet(-8.0), n),
        right = repeat(&packet(8.0), n),
        positions = repeat("-8.0", n),
        occupied = repeat("[-16.0, 0.0]", n),
        empty = repeat("[0.0, 16.0]", n),
    ))
}

/// Two-well superposition with left weight `p_left` and positions sampled
/// from `|Ψ(0)|²`.
pub fn born_rule(p_left: f64, size: usize, master_seed: u64) -> ScenarioConfig {
    let (a, b) = (p_left.sqrt(), (1.0 - p_left).sqrt());
    build(&format!(
        r#"
name = "born-rule"

[grid]
particles = 1
points = 256
box_length = 32.0

[potential]
kind = "double_well"
barrier = 2.0
separation = 16.0

[[initial.branches]]
amplitude = {a:?}
packets = [{{ center = -8.0, width = 1.0 }}]

[[initial.branches]]
amplitude = {b:?}
packets = [{{ center = 8.0, width = 1.0 }}]

[collapse]
gamma_L = 0.5
a_L = 4.0

[time]
dt = 0.005
duration = 15.0
record_stride = 20

[ensemble]
size = {size}
master_seed = {master_seed}

[[branches]]
name = "left"
region = [[-16.0, 0.0]]

[[branches]]
name = "right"
region = [[0.0, 16.0]]
"#
    ))
}

/// Spreading, moving packet without localization.
pub fn equivariance(size: usize, master_seed: u64) -> ScenarioConfig {
    build(&format!(
        r#"
name = "equivariance"

[grid]
particles = 1
points = 128
box_length = 64.0

[[initial.branches]]
amplitude = 1.0
packets = [{{ center = -8.0, width = 2.0, momentum = 1.0 }}]

[collapse]
gamma_L = 0.0
a_L = 1.0

[time]
dt = 0.01
duration = 2.0
record_stride = 50

[ensemble]
size = {size}
master_seed = {master_seed}
"#
    ))
}

/// Three particles: two at `u = -8` in both branches, the third at `u` in
/// the "mismatched" branch and at `v = 8` in the "matched" one; the
/// positions are `(u, u, v)`.
///
/// With `environment` the third particle repels the other two, which drives
/// the mismatched components away from the positions. Without it the
/// mismatched branch has the larger `Λ` and wins.
pub fn stabilization(environment: bool) -> ScenarioConfig {
    let interactions = if environment {
        "[[interactions]]\npairs = [[0, 2], [1, 2]]\nstrength = 16.0\nrange = 3.0\n"
    } else {
        ""
    };
    let packet = |c: f64| format!("{{ center = {c:?}, width = 2.0 }}");
    let u = packet(-8.0);
    let v = packet(8.0);
    build(&format!(
        r#"
name = "stabilization"

[grid]
particles = 3
points = 64
box_length = 32.0

[potential]
kind = "double_well"
barrier = 3.0
separation = 16.0

{interactions}
[[initial.branches]]
amplitude = 0.7071067811865476
packets = [{u}, {u}, {u}]

[[initial.branches]]
amplitude = 0.7071067811865476
packets = [{u}, {u}, {v}]

[initial]
positions = [-8.0, -8.0, 8.0]

[collapse]
gamma_L = 1.0
a_L = 3.0

[time]
dt = 0.01
duration = 10.0
record_stride = 10

[[branches]]
name = "mismatched"
region = [[-16.0, 16.0], [-16.0, 16.0], [-16.0, 0.0]]

[[branches]]
name = "matched"
region = [[-16.0, 16.0], [-16.0, 16.0], [0.0, 16.0]]
"#
    ))
}

/// Every library scenario with representative parameters.
pub fn all() -> Vec<ScenarioConfig> {
    vec![
        free_gaussian(),
        wide_localization(1.0),
        branch_dominance(),
        collapse_rate(),
        clustered(1),
        clustered(2),
        born_rule(0.7, 500, 2024),
        equivariance(10_000, 7),
        stabilization(true),
    ]
}
