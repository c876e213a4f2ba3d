use pyo3::ffi::c_str;
use pyo3::prelude::*;

use pyqfock::pyqfock;

#[test]
fn module_runs_in_embedded_interpreter() {
    pyo3::append_to_inittab!(pyqfock);
    Python::initialize();
    Python::attach(|py| {
        let code = c_str!(
            r#"
import pyqfock as qf
ctx = qf.FockContext(2, 0.5, 4)
gram = qf.GramFamily(ctx)
g2 = gram.gram(2)
assert abs(g2[1][2] - 0.5) < 1e-15 and abs(g2[0][0] - 1.5) < 1e-15
l1 = qf.creation_left(ctx, 0)
r1 = qf.creation_right(ctx, 0)
comm = l1.q_adjoint(gram).commutator(r1)
# [L_1^†, R_1] = q^m on level m
assert abs(comm.block(3, 3)[0][0] - 0.125) < 1e-12
assert all(r["pass"] for r in qf.relations_suite(gram))
try:
    qf.creation_left(ctx, 5)
    raise SystemExit("letter out of range accepted")
except ValueError:
    pass
"#
        );
        py.run(code, None, None).unwrap();
    });
}
