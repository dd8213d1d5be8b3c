//! Verifiable FHE: key generation, encryption, proven evaluation, verification and
//! decryption, with the satisfaction-checking backend.
//!
//! The shipped backend is not zero-knowledge: an evaluation tag carries the full
//! witness, so it reveals the server's inputs.

mod experiment;
mod oracle;
mod tag;

use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::bgv::{decrypt, encrypt, keygen, BgvParams, Ciphertext, Plaintext, PublicKey, RelinKey, SecretKey};
use crate::error::{Error, Result};
use crate::r1cs::{
    compile, generate_witness, public_inputs, CompileContext, ConstraintSystem, CostStats, FheCircuit, FieldParams,
    Schedule, Trace,
};
use crate::ring::derive_rng;

pub use experiment::{flip_coefficient, sample_inputs, soundness_experiment, ExperimentReport, Sampler, Strategy};
pub use oracle::{ind_cca1_game, CcaAdversary, GuessingAdversary, VfheOracle};
pub use tag::{io_digest, EvalTag, TAG_MAGIC};

/// The registered circuit or the identity circuit used to tag fresh ciphertexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Circuit,
    Identity,
}

#[derive(Debug, Clone)]
struct Registered {
    circuit: FheCircuit,
    system: Arc<ConstraintSystem>,
    id: [u8; 32],
    stats: CostStats,
}

impl Registered {
    fn new(circuit: FheCircuit, ctx: &CompileContext) -> Result<Self> {
        let compiled = compile(&circuit, ctx)?;
        let id = Sha256::digest(compiled.system.to_text().as_bytes()).into();
        Ok(Self { circuit, system: Arc::new(compiled.system), id, stats: compiled.stats })
    }
}

/// Server half: FHE evaluation keys and what is needed to produce tags.
#[derive(Debug, Clone)]
pub struct EvalKey {
    ctx: CompileContext,
    circuit: FheCircuit,
    identity: FheCircuit,
    ids: [[u8; 32]; 2],
}

impl EvalKey {
    pub fn params(&self) -> &Arc<BgvParams> {
        &self.ctx.params
    }

    pub fn public_key(&self) -> &PublicKey {
        self.ctx.pk.as_ref().expect("set at kgen")
    }

    pub fn relin_key(&self) -> &RelinKey {
        self.ctx.rk.as_ref().expect("set at kgen")
    }

    pub fn circuit(&self) -> &FheCircuit {
        &self.circuit
    }

    pub fn field(&self) -> &FieldParams {
        &self.ctx.field
    }

    pub fn context(&self) -> &CompileContext {
        &self.ctx
    }

    pub fn system_id(&self, target: Target) -> [u8; 32] {
        self.ids[target as usize]
    }

    fn target_circuit(&self, target: Target) -> &FheCircuit {
        match target {
            Target::Circuit => &self.circuit,
            Target::Identity => &self.identity,
        }
    }
}

/// Client half: secret key plus the compiled systems and their public-input layout.
#[derive(Debug, Clone)]
pub struct VerifyKey {
    sk: SecretKey,
    systems: [Registered; 2],
}

impl VerifyKey {
    pub fn secret_key(&self) -> &SecretKey {
        &self.sk
    }

    pub fn params(&self) -> &Arc<BgvParams> {
        self.sk.params()
    }

    pub fn system(&self, target: Target) -> &ConstraintSystem {
        &self.systems[target as usize].system
    }

    pub fn stats(&self, target: Target) -> &CostStats {
        &self.systems[target as usize].stats
    }

    pub fn circuit(&self) -> &FheCircuit {
        &self.systems[0].circuit
    }
}

#[derive(Debug, Clone)]
pub struct VfheKeys {
    pub eval: EvalKey,
    pub verify: VerifyKey,
}

impl VfheKeys {
    /// Hex digest over the public key, relinearization key and both system ids.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.eval.public_key().to_bytes());
        h.update(self.eval.relin_key().to_bytes());
        for id in &self.eval.ids {
            h.update(id);
        }
        hex::encode(h.finalize())
    }
}

/// Generates FHE keys for `params` and compiles `circuit` (and the identity circuit)
/// against them.
pub fn kgen(circuit: &FheCircuit, params: &Arc<BgvParams>, field: &FieldParams, seed: u64) -> Result<VfheKeys> {
    let (sk, pk, rk) = keygen(params, seed);
    let ctx = CompileContext {
        field: field.clone(),
        params: params.clone(),
        pk: Some(pk),
        rk: Some(rk),
        schedule: Schedule::Lazy,
    };
    let identity = FheCircuit::identity();
    let f = Registered::new(circuit.clone(), &ctx)?;
    let id = Registered::new(identity.clone(), &ctx)?;
    let ids = [f.id, id.id];
    Ok(VfheKeys {
        eval: EvalKey { ctx, circuit: circuit.clone(), identity, ids },
        verify: VerifyKey { sk, systems: [f, id] },
    })
}

/// `τ_x`: the input ciphertexts themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputTag(pub Vec<Ciphertext>);

impl InputTag {
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for c in &self.0 {
            h.update(c.to_bytes());
        }
        h.finalize().into()
    }
}

/// Encrypts each client input.
pub fn enc(pk: &PublicKey, xs: &[Plaintext], seed: u64) -> Result<(Vec<Ciphertext>, InputTag)> {
    let params = pk.params();
    let mut rng = derive_rng(seed, "vfhe-enc");
    let mut cts = Vec::with_capacity(xs.len());
    for x in xs {
        if x.modulus() != params.plain_modulus() || x.coeffs().len() != params.degree() {
            return Err(Error::OutOfRange("plaintext outside the message space".into()));
        }
        cts.push(encrypt(pk, x, rand::Rng::gen(&mut rng))?);
    }
    let tag = InputTag(cts.clone());
    Ok((cts, tag))
}

/// Runs the registered circuit on `c_x` and server inputs `w`, tagging the result.
/// Out-of-domain `w` is evaluated anyway; verification rejects the tag.
pub fn eval(ek: &EvalKey, c_x: &[Ciphertext], w: &[Vec<i64>], seed: u64) -> Result<(Ciphertext, EvalTag)> {
    let trace = ek.circuit.evaluate(ek.public_key(), Some(ek.relin_key()), c_x, w, seed)?;
    let tag = prove(ek, Target::Circuit, &trace)?;
    Ok((trace.output, tag))
}

/// Identity-circuit tag for a ciphertext, which makes it decryptable through the oracle.
pub fn eval_identity(ek: &EvalKey, c: &Ciphertext) -> Result<EvalTag> {
    let trace = Trace {
        inputs: vec![c.clone()],
        pts: Vec::new(),
        mod_switch: Vec::new(),
        flood: Vec::new(),
        output: c.clone(),
    };
    prove(ek, Target::Identity, &trace)
}

/// Tag for an arbitrary trace (honest or not).
pub fn prove(ek: &EvalKey, target: Target, trace: &Trace) -> Result<EvalTag> {
    let w = generate_witness(ek.target_circuit(target), &ek.ctx, trace)?;
    Ok(EvalTag { system_id: ek.system_id(target), io_digest: io_digest(&w.public), witness: w.private })
}

/// Accepts iff the tag names a registered system and its witness satisfies it with the
/// public inputs recomputed from `τ_x` and `c_y`. Malformed input yields `false`.
pub fn verify(vk: &VerifyKey, c_y: &Ciphertext, tau_x: &InputTag, tau_y: &EvalTag) -> bool {
    let Some(reg) = vk.systems.iter().find(|r| r.id == tau_y.system_id) else {
        return false;
    };
    let Ok(public) = public_inputs(&reg.circuit, vk.params(), &tau_x.0, c_y) else {
        return false;
    };
    if io_digest(&public) != tau_y.io_digest {
        return false;
    }
    reg.system.is_satisfied(&public, &tau_y.witness).unwrap_or(false)
}

pub fn dec(sk: &SecretKey, c_y: &Ciphertext) -> Plaintext {
    decrypt(sk, c_y)
}
