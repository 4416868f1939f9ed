//! Storage policies and the systematic Reed-Solomon codec.
//!
//! A policy turns one cache into a stripe of `n = k + r` redundancy units.
//! Replication is the degenerate `k = 1` code where every unit is a full
//! copy, so the rest of the crate never special-cases it.
//!
//! The erasure code uses the generator `[I_k; C]` where `C` is the `r x k`
//! Cauchy matrix `C[i][j] = 1 / (x_i + y_j)` with `x_i = k + i`, `y_j = j`.
//! Every `k x k` submatrix of that generator is invertible, so any `k`
//! distinct units recover the data, and units `0..k` are verbatim slices of
//! the (zero-padded) input.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::gf256::{self, Matrix};
use crate::scalar::Scalar;

/// Largest stripe GF(2^8) can address with distinct evaluation points.
pub const MAX_UNITS: usize = 255;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("insufficient units: have {have}, need {need}")]
    InsufficientUnits { have: usize, need: usize },
    #[error("corrupt stripe: {0}")]
    CorruptStripe(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Replication,
    ErasureCode,
}

/// Replication or EC(k+r). Construct through [`StoragePolicy::replication`],
/// [`StoragePolicy::erasure`], or by parsing `replica<N>` / `ec<K>+<R>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StoragePolicy {
    kind: PolicyKind,
    k: usize,
    r: usize,
}

impl StoragePolicy {
    pub fn replication(copies: usize) -> Result<Self, CodecError> {
        if copies == 0 {
            return Err(CodecError::InvalidPolicy("replication needs at least one copy".into()));
        }
        Ok(Self { kind: PolicyKind::Replication, k: 1, r: copies - 1 })
    }

    pub fn erasure(k: usize, r: usize) -> Result<Self, CodecError> {
        if k < 2 {
            return Err(CodecError::InvalidPolicy(format!(
                "erasure code needs k >= 2 data units, got {k}"
            )));
        }
        if k + r > MAX_UNITS {
            return Err(CodecError::InvalidPolicy(format!(
                "stripe of {} units exceeds the GF(2^8) limit of {MAX_UNITS}",
                k + r
            )));
        }
        Ok(Self { kind: PolicyKind::ErasureCode, k, r })
    }

    /// Policy recorded in a stripe header, where `k = 1` means replication.
    pub fn from_k_r(k: usize, r: usize) -> Result<Self, CodecError> {
        if k == 1 {
            Self::replication(r + 1)
        } else {
            Self::erasure(k, r)
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.k + self.r
    }

    pub fn is_replication(&self) -> bool {
        self.kind == PolicyKind::Replication
    }

    /// Bytes per redundancy unit for a cache of `size` bytes.
    pub fn unit_size(&self, size: usize) -> usize {
        size.div_ceil(self.k)
    }

    /// Bytes stored across the whole stripe, padding included.
    pub fn stored_size(&self, size: usize) -> usize {
        self.n() * self.unit_size(size)
    }
}

impl fmt::Display for StoragePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PolicyKind::Replication => write!(f, "Replica{}", self.n()),
            PolicyKind::ErasureCode => write!(f, "EC{}+{}", self.k, self.r),
        }
    }
}

impl FromStr for StoragePolicy {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || CodecError::InvalidPolicy(format!("cannot parse policy {s:?}"));
        if let Some(copies) = lower.strip_prefix("replica") {
            return Self::replication(copies.parse().map_err(|_| bad())?);
        }
        if let Some(rest) = lower.strip_prefix("ec") {
            let (k, r) = rest.split_once('+').ok_or_else(bad)?;
            return Self::erasure(k.parse().map_err(|_| bad())?, r.parse().map_err(|_| bad())?);
        }
        Err(bad())
    }
}

/// One redundancy unit of an encoded cache.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stripe {
    pub unit_index: usize,
    pub payload: Vec<u8>,
    pub original_size: usize,
    pub policy: StoragePolicy,
}

/// Stored bytes per logical byte, `n / k`.
pub fn redundancy<T: Scalar>(policy: &StoragePolicy) -> T {
    T::from_count(policy.n()) / T::from_count(policy.k())
}

fn parity_matrix(k: usize, r: usize) -> Matrix {
    let mut m = Matrix::zeros(r, k);
    for i in 0..r {
        for j in 0..k {
            let x = (k + i) as u8;
            let y = j as u8;
            m.set(i, j, gf256::inv(gf256::add(x, y)));
        }
    }
    m
}

/// Full `n x k` generator: identity on top of the Cauchy block.
pub fn generator_matrix(policy: &StoragePolicy) -> Matrix {
    let (k, r) = (policy.k(), policy.r());
    let parity = parity_matrix(k, r);
    let mut g = Matrix::zeros(k + r, k);
    for i in 0..k {
        g.set(i, i, 1);
    }
    for i in 0..r {
        for j in 0..k {
            g.set(k + i, j, parity.get(i, j));
        }
    }
    g
}

pub fn encode(data: &[u8], policy: &StoragePolicy) -> Result<Vec<Stripe>, CodecError> {
    if data.is_empty() {
        return Err(CodecError::InvalidInput("cannot encode an empty cache".into()));
    }
    let unit = |unit_index, payload| Stripe {
        unit_index,
        payload,
        original_size: data.len(),
        policy: *policy,
    };
    if policy.is_replication() {
        return Ok((0..policy.n()).map(|i| unit(i, data.to_vec())).collect());
    }

    let (k, r) = (policy.k(), policy.r());
    let len = policy.unit_size(data.len());
    let mut data_units: Vec<Vec<u8>> = data.chunks(len).map(<[u8]>::to_vec).collect();
    data_units.resize(k, Vec::new());
    for u in &mut data_units {
        u.resize(len, 0);
    }

    let parity = parity_matrix(k, r);
    let mut out: Vec<Stripe> = Vec::with_capacity(k + r);
    for i in 0..r {
        let mut acc = vec![0u8; len];
        for (j, src) in data_units.iter().enumerate() {
            gf256::mul_acc(parity.get(i, j), src, &mut acc);
        }
        out.push(unit(k + i, acc));
    }
    let mut units: Vec<Stripe> =
        data_units.into_iter().enumerate().map(|(i, p)| unit(i, p)).collect();
    units.append(&mut out);
    Ok(units)
}

fn check_units<'a>(
    units: &'a [Stripe],
    policy: &StoragePolicy,
    original_size: usize,
) -> Result<Vec<&'a Stripe>, CodecError> {
    let n = policy.n();
    let mut by_index: Vec<Option<&Stripe>> = vec![None; n];
    for u in units {
        if u.unit_index >= n {
            return Err(CodecError::InvalidInput(format!(
                "unit index {} outside stripe of {n}",
                u.unit_index
            )));
        }
        if by_index[u.unit_index].is_some() {
            return Err(CodecError::InvalidInput(format!("duplicate unit {}", u.unit_index)));
        }
        by_index[u.unit_index] = Some(u);
    }
    let present: Vec<&Stripe> = by_index.into_iter().flatten().collect();
    if present.len() < policy.k() {
        return Err(CodecError::InsufficientUnits { have: present.len(), need: policy.k() });
    }
    let expected = policy.unit_size(original_size);
    if let Some(bad) = present.iter().find(|u| u.payload.len() != expected) {
        return Err(CodecError::CorruptStripe(format!(
            "unit {} holds {} bytes, expected {expected}",
            bad.unit_index,
            bad.payload.len()
        )));
    }
    Ok(present)
}

/// Rebuild the original bytes from any `k` distinct units of one stripe.
pub fn decode(
    units: &[Stripe],
    policy: &StoragePolicy,
    original_size: usize,
) -> Result<Vec<u8>, CodecError> {
    if original_size == 0 {
        return Err(CodecError::InvalidInput("original size must be positive".into()));
    }
    let present = check_units(units, policy, original_size)?;
    if policy.is_replication() {
        return Ok(present[0].payload[..original_size].to_vec());
    }

    let k = policy.k();
    let len = policy.unit_size(original_size);
    // Indices are sorted, so data units come first and are preferred.
    let chosen = &present[..k];
    let mut data = Vec::with_capacity(k * len);
    if chosen.iter().enumerate().all(|(i, u)| u.unit_index == i) {
        for u in chosen {
            data.extend_from_slice(&u.payload);
        }
    } else {
        let rows: Vec<usize> = chosen.iter().map(|u| u.unit_index).collect();
        let decoder = generator_matrix(policy)
            .select_rows(&rows)
            .inverse()
            .ok_or_else(|| CodecError::CorruptStripe("singular decode matrix".into()))?;
        for i in 0..k {
            if let Some(u) = chosen.iter().find(|u| u.unit_index == i) {
                data.extend_from_slice(&u.payload);
                continue;
            }
            let mut acc = vec![0u8; len];
            for (j, src) in chosen.iter().enumerate() {
                gf256::mul_acc(decoder.get(i, j), &src.payload, &mut acc);
            }
            data.extend_from_slice(&acc);
        }
    }
    data.truncate(original_size);
    Ok(data)
}

/// Stripe metadata stored next to the unit files: ASCII `k=`, `r=`, `size=` lines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub policy: StoragePolicy,
    pub original_size: usize,
}

impl Header {
    pub fn to_text(&self) -> String {
        format!("k={}\nr={}\nsize={}\n", self.policy.k(), self.policy.r(), self.original_size)
    }

    pub fn parse(text: &str) -> Result<Self, CodecError> {
        let (mut k, mut r, mut size) = (None, None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CodecError::Header(format!("expected key=value, got {line:?}")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| CodecError::Header(format!("non-integer value in {line:?}")))?;
            match key.trim() {
                "k" => k = Some(value),
                "r" => r = Some(value),
                "size" => size = Some(value),
                other => return Err(CodecError::Header(format!("unknown key {other:?}"))),
            }
        }
        let missing = |name: &str| CodecError::Header(format!("missing {name}"));
        let policy = StoragePolicy::from_k_r(k.ok_or_else(|| missing("k"))?, r.ok_or_else(|| missing("r"))?)?;
        let original_size = size.ok_or_else(|| missing("size"))?;
        if original_size == 0 {
            return Err(CodecError::Header("size must be positive".into()));
        }
        Ok(Self { policy, original_size })
    }
}

pub fn unit_path(base: &Path, index: usize) -> PathBuf {
    let mut name = base.as_os_str().to_owned();
    name.push(format!(".unit{index}"));
    PathBuf::from(name)
}

pub fn header_path(base: &Path) -> PathBuf {
    let mut name = base.as_os_str().to_owned();
    name.push(".header");
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CodecError + '_ {
    move |source| CodecError::Io { path: path.to_path_buf(), source }
}

/// Encode `input` and write `<base>.unit<i>` plus `<base>.header`.
pub fn encode_file(input: &Path, base: &Path, policy: &StoragePolicy) -> Result<Header, CodecError> {
    let data = fs::read(input).map_err(io_err(input))?;
    let units = encode(&data, policy)?;
    for u in &units {
        let path = unit_path(base, u.unit_index);
        fs::write(&path, &u.payload).map_err(io_err(&path))?;
    }
    let header = Header { policy: *policy, original_size: data.len() };
    let path = header_path(base);
    fs::write(&path, header.to_text()).map_err(io_err(&path))?;
    Ok(header)
}

/// Read whichever unit files under `base` still exist and rebuild the data into `output`.
pub fn decode_file(base: &Path, output: &Path) -> Result<Header, CodecError> {
    let hpath = header_path(base);
    let header = Header::parse(&fs::read_to_string(&hpath).map_err(io_err(&hpath))?)?;
    let mut units = Vec::new();
    for i in 0..header.policy.n() {
        let path = unit_path(base, i);
        match fs::read(&path) {
            Ok(payload) => units.push(Stripe {
                unit_index: i,
                payload,
                original_size: header.original_size,
                policy: header.policy,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(io_err(&path)(e)),
        }
    }
    let data = decode(&units, &header.policy, header.original_size)?;
    fs::write(output, data).map_err(io_err(output))?;
    Ok(header)
}
