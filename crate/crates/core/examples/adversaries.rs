//! The adversary registry: every strategy with its parameters, and which of
//! them apply to a given protocol.

use rspv_lab::adversaries::{make_adversary_for, registry, Params};
use rspv_lab::chain::{Kp, KpBackend, QFac};
use rspv_lab::protocol::{Mode, ModeOf};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let qfac = QFac::new(Kp { n: 2, eps: 0.1, kappa: 1, backend: KpBackend::Ideal })?;
    let test = ModeOf { inner: &qfac, mode: Mode::Test };
    for d in registry() {
        let applies = make_adversary_for(d.name, &Params::new(), &test).is_ok();
        println!("{:18} applies to the phase-state protocol: {applies:5}  {}", d.name, d.summary);
    }
    Ok(())
}
