use std::collections::HashMap;

use axum::http::HeaderMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub user: String,
    /// Read-only tokens may view sessions shared with them but create nothing.
    #[serde(default)]
    pub read_only: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub user: String,
    pub read_only: bool,
}

/// Tokens are kept only as SHA-256 hashes.
#[derive(Debug, Clone, Default)]
pub struct TokenTable {
    by_hash: HashMap<String, Principal>,
}

pub fn token_hash(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

impl TokenTable {
    pub fn new(entries: &[TokenEntry]) -> Self {
        let by_hash = entries
            .iter()
            .map(|e| {
                (
                    token_hash(&e.token),
                    Principal {
                        user: e.user.clone(),
                        read_only: e.read_only,
                    },
                )
            })
            .collect();
        Self { by_hash }
    }

    pub fn authenticate(&self, headers: &HeaderMap) -> Result<Principal, ApiError> {
        let value = headers
            .get(axum::http::header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .ok_or(ApiError::Unauthorized)?;
        let token = value
            .strip_prefix("Bearer ")
            .ok_or(ApiError::Unauthorized)?
            .trim();
        self.by_hash
            .get(&token_hash(token))
            .cloned()
            .ok_or(ApiError::Unauthorized)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Owner,
    Viewer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acl {
    pub owner: String,
    #[serde(default)]
    pub viewers: Vec<String>,
}

impl Acl {
    pub fn role(&self, p: &Principal) -> Option<Role> {
        if self.owner == p.user && !p.read_only {
            Some(Role::Owner)
        } else if self.owner == p.user || self.viewers.contains(&p.user) {
            Some(Role::Viewer)
        } else {
            None
        }
    }
}
