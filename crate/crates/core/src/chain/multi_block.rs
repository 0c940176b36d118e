use crate::amplification::Profile;
use crate::protocol::{Adversary, FlagValue, Message, Mode, ProtocolError, Result, Session, StepResult, TwoModeProtocol};
use crate::qsim::Bits;

use super::one_block::{one_block_tensor_in, BlockRun};
use super::BlockKeys;

/// Multi-block protocol parameters. ε0 = ε − 10n/√m is the budget handed to
/// the tensored blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiBlock {
    pub m: usize,
    pub n: usize,
    pub eps: f64,
    pub kappa: usize,
    pub profile: Profile,
}

/// What a multi-block run leaves behind, for callers inside a session.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiBlockRun {
    pub flag: FlagValue,
    /// Server blocks (comp mode: fused into one register, the only entry).
    pub registers: Vec<String>,
    /// Client records of the joint x0 and x1 (comp mode) and the xor bits.
    pub descriptions: Vec<String>,
    pub keys: Option<BlockKeys>,
}

impl MultiBlock {
    pub fn new(m: usize, n: usize, eps: f64, kappa: usize, profile: Profile) -> Result<Self> {
        let mb = Self { m, n, eps, kappa, profile };
        mb.validate()?;
        Ok(mb)
    }

    pub fn eps0(&self) -> f64 {
        self.eps - 10.0 * self.n as f64 / (self.m as f64).sqrt()
    }

    /// ε > 11n/√m is required in the paper profile only.
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n == 0 {
            return Err(ProtocolError::BadParameters(format!("need m ≥ 2 and n ≥ 1, got m = {}, n = {}", self.m, self.n)));
        }
        if self.profile == Profile::Paper && self.eps <= 11.0 * self.n as f64 / (self.m as f64).sqrt() {
            return Err(ProtocolError::BadParameters(format!(
                "eps = {} must exceed 11n/sqrt(m) = {}",
                self.eps,
                11.0 * self.n as f64 / (self.m as f64).sqrt()
            )));
        }
        Ok(())
    }
}

/// Reveal check: every block shows x0 or x1 and the branch parities agree
/// with the reported xor bits.
fn reveal_consistent(blocks: &[BlockRun], xor: &[bool], revealed: &[Bits]) -> bool {
    if revealed.len() != blocks.len() {
        return false;
    }
    let mut branch = Vec::with_capacity(blocks.len());
    for (b, r) in blocks.iter().zip(revealed) {
        if r == &b.keys.x0 {
            branch.push(false);
        } else if r == &b.keys.x1 {
            branch.push(true);
        } else {
            return false;
        }
    }
    (1..blocks.len()).all(|i| (branch[0] ^ branch[i]) == xor[i - 1])
}

/// One multi-block run inside a session.
pub fn multi_block_in(s: &mut Session, adv: &dyn Adversary, p: &MultiBlock, mode: Mode) -> Result<MultiBlockRun> {
    p.validate()?;
    let blocks = one_block_tensor_in(s, adv, p.m, p.n, p.kappa)?;
    let mut flag = blocks.iter().fold(FlagValue::Pass, |f, b| f.and(b.flag));
    let names: Vec<String> = blocks.iter().map(|b| b.q.clone()).collect();

    s.send(Message::new("xor"));
    let ctx = s.ctx("report-xor");
    let mut xor = adv.report_xor(&ctx, &mut s.view(), &names)?;
    if xor.len() != p.n - 1 {
        // malformed answer
        flag = FlagValue::Fail;
        xor.resize(p.n - 1, false);
    }
    let xor_bits = Bits::from_bools(xor.clone());
    s.reply(Message::new("xor").bits(&xor_bits));
    let mut descriptions = Vec::new();
    if p.n > 1 {
        descriptions.push(s.set_client("xor", xor_bits)?);
    }
    s.mark_divergence();

    match mode {
        Mode::Test => {
            s.send(Message::new("reveal"));
            let ctx = s.ctx("reveal");
            let revealed = adv.reveal_blocks(&ctx, &mut s.view(), &names)?;
            let all = revealed.iter().fold(Bits::zeros(0), |a, r| a.concat(r));
            s.reply(Message::new("reveal").bits(&all));
            flag = flag.and(FlagValue::from_pass(reveal_consistent(&blocks, &xor, &revealed)));
            Ok(MultiBlockRun { flag, registers: Vec::new(), descriptions: Vec::new(), keys: None })
        }
        Mode::Comp => {
            let mut out = vec![blocks[0].keys.clone()];
            for (i, b) in blocks.iter().enumerate().skip(1) {
                out.push(b.keys.relabel(xor[i - 1]));
            }
            let keys = BlockKeys { blocks: out, xor_bits: xor };
            let x0 = s.set_client("x0", keys.joint(false))?;
            let x1 = s.set_client("x1", keys.joint(true))?;
            let q = s.reg("q");
            for r in &names {
                // a block the server threw away is replaced by |0…0⟩
                if !s.world.contains(r) {
                    s.world.alloc_zero(r, p.m, crate::protocol::Owner::Server)?;
                }
            }
            let parts: Vec<&str> = names.iter().map(|x| x.as_str()).collect();
            s.world.fuse(&q, &parts)?;
            let mut d = vec![x0, x1];
            d.extend(descriptions);
            Ok(MultiBlockRun { flag, registers: vec![q], descriptions: d, keys: Some(keys) })
        }
    }
}

impl TwoModeProtocol for MultiBlock {
    fn id(&self) -> String {
        "multi_block".into()
    }
    fn features(&self) -> Vec<&'static str> {
        vec!["bb84", "one_block", "multi_block"]
    }
    fn execute_mode(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let r = multi_block_in(s, adv, self, mode)?;
        Ok(StepResult { flag: r.flag, score: None, descriptions: r.descriptions, outputs: r.registers })
    }
}
