//! Sparse cq-state simulation: prepare a Bell pair, measure it three ways and
//! compare reduced states by trace distance.

use rspv_lab::qsim::{gates, trace_distance, Basis, CqEnsemble, RegisterLayout, SparseState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let layout = RegisterLayout::new().quantum("q", 2)?.classical("r", 2)?;
    let bell = CqEnsemble::pure(layout, SparseState::zero(2))?
        .apply_unitary(&[0], &gates::h())?
        .apply_unitary(&[0, 1], &gates::cnot())?;

    for (name, e) in [
        ("computational", bell.measure_basis(&[0, 1], Basis::Computational, "r")?),
        ("Hadamard", bell.measure_basis(&[0, 1], Basis::Hadamard, "r")?),
        ("Bell", bell.measure_bell(&[(0, 1)], "r")?),
    ] {
        println!("{name} basis outcomes:");
        for (record, p) in e.label_distribution("r") {
            println!("  {record}: {p:.3}");
        }
    }

    let joint = bell.density_of(&["q"], None)?;
    println!("joint state is pure: trace {:.3}, eigenvalues {:.3?}", joint.trace(), joint.eigenvalues());
    let plus = {
        let mut s = SparseState::zero(1);
        s.apply_matrix(&[0], &gates::h())?;
        s
    };
    let zero = rspv_lab::qsim::DensityView::from_pure(&SparseState::zero(1));
    let plus = rspv_lab::qsim::DensityView::from_pure(&plus);
    println!("D(|0⟩, |+⟩) = {:.6} (1/√2 = {:.6})", trace_distance(&zero, &plus)?, std::f64::consts::FRAC_1_SQRT_2);
    Ok(())
}
