//! Operator credentials, sessions and lockout.
//!
//! Credential file, one user per line:
//! `user:iterations:salt_hex:hash_hex:panels` where the hash is
//! PBKDF2-HMAC-SHA256 and `panels` is `*` or a comma-separated id list.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use pbkdf2::pbkdf2_hmac;
use sha2::Sha256;
use subtle::ConstantTimeEq;

pub const DEFAULT_ITERATIONS: u32 = 100_000;
const SALT_LEN: usize = 16;
const TOKEN_LEN: usize = 16;

/// Wall time since the Unix epoch. Sessions and lockouts use it; the
/// simulation never does.
pub trait WallClock: Send + Sync {
    fn now(&self) -> Duration;
}

pub struct SystemClock;

impl WallClock for SystemClock {
    fn now(&self) -> Duration {
        SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default()
    }
}

#[derive(Clone, Default)]
pub struct ManualClock(Arc<Mutex<Duration>>);

impl ManualClock {
    pub fn new(start: Duration) -> ManualClock {
        ManualClock(Arc::new(Mutex::new(start)))
    }

    pub fn advance(&self, by: Duration) {
        *self.0.lock().unwrap() += by;
    }
}

impl WallClock for ManualClock {
    fn now(&self) -> Duration {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PanelScope {
    All,
    Only(BTreeSet<String>),
}

impl PanelScope {
    pub fn permits(&self, panel: &str) -> bool {
        match self {
            PanelScope::All => true,
            PanelScope::Only(ids) => ids.contains(panel),
        }
    }

    fn parse(s: &str) -> PanelScope {
        if s.trim() == "*" {
            PanelScope::All
        } else {
            PanelScope::Only(s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect())
        }
    }

    fn render(&self) -> String {
        match self {
            PanelScope::All => "*".into(),
            PanelScope::Only(ids) => ids.iter().cloned().collect::<Vec<_>>().join(","),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credential {
    pub user: String,
    pub iterations: u32,
    pub salt: Vec<u8>,
    pub hash: [u8; 32],
    pub panels: PanelScope,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CredentialError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
}

pub fn hash_password(password: &str, salt: &[u8], iterations: u32) -> [u8; 32] {
    let mut out = [0u8; 32];
    pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, iterations, &mut out);
    out
}

fn random_bytes<const N: usize>() -> [u8; N] {
    let mut buf = [0u8; N];
    getrandom::fill(&mut buf).expect("OS random source available");
    buf
}

/// A credential file line for a new user with a fresh random salt.
pub fn make_record(user: &str, password: &str, iterations: u32, panels: &str) -> String {
    let salt = random_bytes::<SALT_LEN>();
    let hash = hash_password(password, &salt, iterations);
    format!("{user}:{iterations}:{}:{}:{}", hex::encode(salt), hex::encode(hash), PanelScope::parse(panels).render())
}

#[derive(Debug, Clone, Default)]
pub struct CredentialStore {
    users: BTreeMap<String, Credential>,
}

impl CredentialStore {
    pub fn parse(text: &str) -> Result<CredentialStore, CredentialError> {
        let mut users = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| CredentialError::Syntax { line: i + 1, msg: msg.into() };
            let f: Vec<&str> = line.split(':').collect();
            if f.len() != 5 {
                return Err(err("expected user:iterations:salt:hash:panels"));
            }
            let iterations: u32 = f[1].parse().map_err(|_| err("bad iteration count"))?;
            if iterations == 0 {
                return Err(err("iteration count must be positive"));
            }
            let salt = hex::decode(f[2]).map_err(|_| err("salt is not hex"))?;
            let hash: [u8; 32] = hex::decode(f[3])
                .ok()
                .and_then(|h| h.try_into().ok())
                .ok_or_else(|| err("hash must be 32 hex-encoded bytes"))?;
            let cred = Credential { user: f[0].into(), iterations, salt, hash, panels: PanelScope::parse(f[4]) };
            if users.insert(f[0].to_string(), cred).is_some() {
                return Err(err("duplicate user"));
            }
        }
        Ok(CredentialStore { users })
    }

    pub fn load(path: &Path) -> Result<CredentialStore, CredentialError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CredentialError::Io(format!("{}: {e}", path.display())))?;
        CredentialStore::parse(&text)
    }

    pub fn insert(&mut self, cred: Credential) {
        self.users.insert(cred.user.clone(), cred);
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Always derives a hash, even for unknown users, so response time does
    /// not reveal which names exist.
    pub fn verify(&self, user: &str, password: &str) -> Option<&Credential> {
        const DUMMY_SALT: [u8; SALT_LEN] = [0u8; SALT_LEN];
        match self.users.get(user) {
            Some(c) => {
                let h = hash_password(password, &c.salt, c.iterations);
                bool::from(h.ct_eq(&c.hash)).then_some(c)
            }
            None => {
                let iterations = self.users.values().next().map_or(DEFAULT_ITERATIONS, |c| c.iterations);
                let _ = hash_password(password, &DUMMY_SALT, iterations);
                None
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub token: String,
    pub user: String,
    /// Wall time the token stops working.
    pub expiry: Duration,
    pub panels: PanelScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum AuthError {
    #[error("bad credentials")]
    BadCredentials,
    #[error("account locked")]
    LockedOut,
    #[error("unauthorized")]
    Unauthorized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthPolicy {
    pub lockout_threshold: u32,
    pub lockout: Duration,
    pub session_ttl: Duration,
}

impl Default for AuthPolicy {
    fn default() -> Self {
        AuthPolicy { lockout_threshold: 5, lockout: Duration::from_secs(300), session_ttl: Duration::from_secs(3600) }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Failures {
    count: u32,
    locked_until: Option<Duration>,
}

pub struct Authenticator {
    store: CredentialStore,
    clock: Arc<dyn WallClock>,
    policy: AuthPolicy,
    sessions: HashMap<String, Session>,
    failures: HashMap<String, Failures>,
}

impl Authenticator {
    pub fn new(store: CredentialStore, clock: Arc<dyn WallClock>, policy: AuthPolicy) -> Authenticator {
        Authenticator { store, clock, policy, sessions: HashMap::new(), failures: HashMap::new() }
    }

    pub fn policy(&self) -> AuthPolicy {
        self.policy
    }

    pub fn login(&mut self, user: &str, password: &str) -> Result<Session, AuthError> {
        let now = self.clock.now();
        let f = self.failures.entry(user.to_string()).or_default();
        if let Some(until) = f.locked_until {
            if now < until {
                return Err(AuthError::LockedOut);
            }
            *f = Failures::default();
        }
        let Some(cred) = self.store.verify(user, password) else {
            let f = self.failures.entry(user.to_string()).or_default();
            f.count += 1;
            if f.count >= self.policy.lockout_threshold {
                f.locked_until = Some(now + self.policy.lockout);
            }
            return Err(AuthError::BadCredentials);
        };
        let session = Session {
            token: hex::encode(random_bytes::<TOKEN_LEN>()),
            user: cred.user.clone(),
            expiry: now + self.policy.session_ttl,
            panels: cred.panels.clone(),
        };
        self.failures.remove(user);
        self.sessions.retain(|_, s| s.expiry > now);
        self.sessions.insert(session.token.clone(), session.clone());
        Ok(session)
    }

    pub fn authorize(&mut self, token: &str) -> Result<&Session, AuthError> {
        let now = self.clock.now();
        match self.sessions.get(token) {
            Some(s) if s.expiry > now => {}
            Some(_) => {
                self.sessions.remove(token);
                return Err(AuthError::Unauthorized);
            }
            None => return Err(AuthError::Unauthorized),
        }
        self.sessions.get(token).ok_or(AuthError::Unauthorized)
    }

    pub fn logout(&mut self, token: &str) {
        self.sessions.remove(token);
    }

    pub fn is_locked(&self, user: &str) -> bool {
        let now = self.clock.now();
        self.failures.get(user).and_then(|f| f.locked_until).is_some_and(|u| now < u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn auth(clock: &ManualClock) -> Authenticator {
        let text =
            format!("{}\n{}\n", make_record("alice", "s3cret", 1000, "*"), make_record("bob", "pw", 1000, "panel-2"));
        let store = CredentialStore::parse(&text).unwrap();
        Authenticator::new(store, Arc::new(clock.clone()), AuthPolicy::default())
    }

    #[test]
    fn record_round_trip() {
        let line = make_record("carol", "pw", 10, "a, b");
        let store = CredentialStore::parse(&line).unwrap();
        let c = store.verify("carol", "pw").unwrap();
        assert_eq!(c.panels, PanelScope::Only(["a".to_string(), "b".to_string()].into()));
        assert!(store.verify("carol", "pW").is_none());
        assert!(store.verify("dave", "pw").is_none());
    }

    #[test]
    fn pbkdf2_known_vector() {
        // RFC 7914 section 11 test vector for PBKDF2-HMAC-SHA256, first 32 bytes
        let h = hash_password("passwd", b"salt", 1);
        assert_eq!(hex::encode(h), "55ac046e56e3089fec1691c22544b605f94185216dde0465e68b9d57c20dacbc");
    }

    #[test]
    fn tokens_are_128_bit_and_distinct() {
        let clock = ManualClock::new(Duration::from_secs(1000));
        let mut a = auth(&clock);
        let s1 = a.login("alice", "s3cret").unwrap();
        let s2 = a.login("alice", "s3cret").unwrap();
        assert_eq!(s1.token.len(), 32);
        assert_ne!(s1.token, s2.token);
    }

    #[test]
    fn session_expires() {
        let clock = ManualClock::new(Duration::from_secs(1000));
        let mut a = auth(&clock);
        let s = a.login("alice", "s3cret").unwrap();
        assert!(a.authorize(&s.token).is_ok());
        clock.advance(Duration::from_secs(3600));
        assert_eq!(a.authorize(&s.token).unwrap_err(), AuthError::Unauthorized);
    }

    #[test]
    fn five_failures_lock_then_unlock() {
        let clock = ManualClock::new(Duration::from_secs(1000));
        let mut a = auth(&clock);
        for _ in 0..5 {
            assert_eq!(a.login("alice", "nope").unwrap_err(), AuthError::BadCredentials);
        }
        assert_eq!(a.login("alice", "s3cret").unwrap_err(), AuthError::LockedOut);
        assert!(a.is_locked("alice"));
        clock.advance(Duration::from_secs(300));
        assert!(a.login("alice", "s3cret").is_ok());
    }

    #[test]
    fn success_resets_failure_count() {
        let clock = ManualClock::new(Duration::from_secs(1000));
        let mut a = auth(&clock);
        for _ in 0..4 {
            let _ = a.login("alice", "nope");
        }
        a.login("alice", "s3cret").unwrap();
        for _ in 0..4 {
            let _ = a.login("alice", "nope");
        }
        assert!(a.login("alice", "s3cret").is_ok());
    }

    #[test]
    fn scope() {
        let clock = ManualClock::new(Duration::from_secs(1000));
        let mut a = auth(&clock);
        let s = a.login("bob", "pw").unwrap();
        assert!(s.panels.permits("panel-2"));
        assert!(!s.panels.permits("panel-1"));
    }
}
