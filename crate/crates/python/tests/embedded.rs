use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

/// Runs `code` with the module bound to `m`; the script asserts for itself.
fn run(code: &str) {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(pyctele::pyctele)(py);
        let ns = PyDict::new(py);
        ns.set_item("m", m).unwrap();
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&ns), None) {
            e.print(py);
            panic!("python assertion failed");
        }
    });
}

#[test]
fn default_config_round_trips() {
    run(r#"
cfg = m.default_config()
assert cfg["case"] == "case0"
assert m.resolve_config(cfg) == cfg
partial = m.resolve_config({"settle": 0.25}, {"control.dt": 0.002})
assert partial["settle"] == 0.25 and partial["control"]["dt"] == 0.002
try:
    m.resolve_config(None, {"control.dt": -1.0})
    raise AssertionError("negative dt accepted")
except ValueError:
    pass
"#);
}

#[test]
fn simulate_returns_summary_and_log() {
    run(r#"
run = m.simulate(None, {"trajectory.kind": "hold", "trajectory.duration": 0.2, "settle": 0.0})
assert run.ok, run.summary
s = run.summary
assert s["max_rcm_error"] < 1e-4
assert len(run) == s["samples"] == len(run.rows)
assert len(run.columns) == len(run.rows[0])
assert run.column("time")[0] == run.rows[0][0]
t = run.column("time")
assert all(b > a for a, b in zip(t, t[1:]))
"#);
}

#[test]
fn state_kinematics_match_the_library() {
    run(r#"
s = m.State.initial()
pos, quat = s.tip_pose()
assert abs(sum(q * q for q in quat) - 1.0) < 1e-12
assert len(s.to_list()) == 10
J = s.jacobian()
assert len(J) == 9 and all(len(r) == 10 for r in J)
r = s.rcm_point()
s2 = m.State(s.q_arm, s.theta, s.delta, 0.0)
# λ = 0 puts the constrained point at the wrist, away from the trocar point.
assert max(abs(a - b) for a, b in zip(r, s2.rcm_point())) > 1e-3
"#);
}

#[test]
fn pinv_and_motor_rates() {
    run(r#"
A = [[1.0, 2.0, 0.0], [0.0, 1.0, 1.0]]
P = m.pinv(A)
AP = [[sum(A[i][k] * P[k][j] for k in range(3)) for j in range(2)] for i in range(2)]
assert all(abs(AP[i][j] - (i == j)) < 1e-12 for i in range(2) for j in range(2))
assert m.motor_velocities(1.0, 0.3, 0.0, 0.0) == [0.0, 0.0, 0.0, 0.0]
w = m.motor_velocities(1.0, 0.3, 0.1, 0.0)
# Opposite tendons move in opposite directions.
assert abs(w[0] + w[2]) < 1e-12 and abs(w[1] + w[3]) < 1e-12
try:
    m.pinv([[1.0], [1.0, 2.0]])
    raise AssertionError("ragged matrix accepted")
except ValueError:
    pass
"#);
}

#[test]
fn service_follows_clutched_stylus() {
    run(r#"
svc = m.TeleopService()
f0 = svc.snapshot()
assert svc.handle("not json") is not None
home = {"position": [0.0, 0.0, 0.0], "quaternion": [0.0, 0.0, 0.0, 1.0]}
assert svc.handle({"stylus_pose": home}) is None
assert svc.handle({"clutch": True}) is None
moved = {"position": [0.002, 0.0, 0.0], "quaternion": [0.0, 0.0, 0.0, 1.0]}
svc.handle({"stylus_pose": moved})
svc.tick(500)
f = svc.snapshot()
assert svc.engaged and not svc.faulted
assert abs(f["desired_pose"]["position"][0] - f0["desired_pose"]["position"][0] - 0.002) < 1e-12
assert abs(svc.time - 500 * svc.dt) < 1e-9
svc.disconnect()
assert not svc.engaged
"#);
}
