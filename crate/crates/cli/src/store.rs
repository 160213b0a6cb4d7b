//! Append-only JSONL campaign store with an in-memory index.
//!
//! Every mutation is written and synced as one event line before it is
//! applied; opening a store replays the log from the start.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use adforge_core::pipeline::{FormattedAd, VariantKind, VariantSet};
use adforge_core::textproc::placeholders;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_FILE: &str = "campaigns.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("campaign {0} not found")]
    CampaignNotFound(String),
    #[error("item {0} not found")]
    ItemNotFound(String),
    #[error("item {id} is {from}; cannot move to {to}")]
    InvalidTransition { id: String, from: Status, to: Status },
    #[error("finalized text still contains placeholders")]
    PlaceholdersRemain,
    #[error("corrupt store log at line {line}: {source}")]
    Corrupt {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("store log references unknown record at line {0}")]
    Dangling(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Draft,
    Reviewed,
    Exported,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Draft => "draft",
            Status::Reviewed => "reviewed",
            Status::Exported => "exported",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemSource {
    Url(String),
    Ad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub campaign_id: String,
    pub source: ItemSource,
    pub variant_set: VariantSet,
    pub status: Status,
    pub variant: Option<VariantKind>,
    pub fills: BTreeMap<String, String>,
    pub finalized_text: Option<String>,
    pub formatted: Option<FormattedAd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub id: String,
    pub name: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    CampaignCreated {
        id: String,
        name: String,
        created_at: u64,
    },
    CampaignDeleted {
        id: String,
    },
    ItemAdded {
        item: Box<Item>,
    },
    ItemFinalized {
        id: String,
        variant: VariantKind,
        fills: BTreeMap<String, String>,
        text: String,
        formatted: FormattedAd,
    },
    ItemExported {
        id: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct State {
    pub campaigns: BTreeMap<String, Campaign>,
    pub items: BTreeMap<String, Item>,
    next_id: u64,
}

impl State {
    fn apply(&mut self, event: &Event) -> Result<(), StoreError> {
        match event {
            Event::CampaignCreated { id, name, created_at } => {
                self.bump(id);
                self.campaigns.insert(
                    id.clone(),
                    Campaign {
                        id: id.clone(),
                        name: name.clone(),
                        created_at: *created_at,
                        items: Vec::new(),
                    },
                );
            }
            Event::CampaignDeleted { id } => {
                let c = self
                    .campaigns
                    .remove(id)
                    .ok_or_else(|| StoreError::CampaignNotFound(id.clone()))?;
                for item in c.items {
                    self.items.remove(&item);
                }
            }
            Event::ItemAdded { item } => {
                self.bump(&item.id);
                let c = self
                    .campaigns
                    .get_mut(&item.campaign_id)
                    .ok_or_else(|| StoreError::CampaignNotFound(item.campaign_id.clone()))?;
                c.items.push(item.id.clone());
                self.items.insert(item.id.clone(), (**item).clone());
            }
            Event::ItemFinalized {
                id,
                variant,
                fills,
                text,
                formatted,
            } => {
                let item = self.item_mut(id)?;
                check_transition(item, Status::Reviewed)?;
                item.status = Status::Reviewed;
                item.variant = Some(*variant);
                item.fills = fills.clone();
                item.finalized_text = Some(text.clone());
                item.formatted = Some(formatted.clone());
            }
            Event::ItemExported { id } => {
                let item = self.item_mut(id)?;
                check_transition(item, Status::Exported)?;
                if item.finalized_text.as_deref().is_some_and(|t| !placeholders(t).is_empty()) {
                    return Err(StoreError::PlaceholdersRemain);
                }
                item.status = Status::Exported;
            }
        }
        Ok(())
    }

    fn bump(&mut self, id: &str) {
        if let Some(n) = id.rsplit('-').next().and_then(|n| n.parse::<u64>().ok()) {
            self.next_id = self.next_id.max(n);
        }
    }

    fn item_mut(&mut self, id: &str) -> Result<&mut Item, StoreError> {
        self.items
            .get_mut(id)
            .ok_or_else(|| StoreError::ItemNotFound(id.to_string()))
    }
}

/// draft → reviewed (re-finalizing a reviewed item is allowed) → exported.
fn check_transition(item: &Item, to: Status) -> Result<(), StoreError> {
    let ok = matches!(
        (item.status, to),
        (Status::Draft, Status::Reviewed) | (Status::Reviewed, Status::Reviewed) | (Status::Reviewed, Status::Exported)
    );
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidTransition {
            id: item.id.clone(),
            from: item.status,
            to,
        })
    }
}

#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    file: File,
    state: State,
}

impl Store {
    /// Opens (creating if needed) `<dir>/campaigns.jsonl` and replays it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(LOG_FILE);
        let state = if path.exists() {
            replay(BufReader::new(File::open(&path)?))?
        } else {
            State::default()
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Store { path, file, state })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// Validates the event against the current state, appends it to the log
    /// and only then applies it.
    pub fn commit(&mut self, event: Event) -> Result<(), StoreError> {
        let mut next = self.state.clone();
        next.apply(&event)?;
        let mut line = serde_json::to_vec(&event)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.state = next;
        Ok(())
    }

    pub fn next_id(&self, prefix: &str) -> String {
        format!("{prefix}-{:06}", self.state.next_id + 1)
    }

    pub fn campaign(&self, id: &str) -> Result<&Campaign, StoreError> {
        self.state
            .campaigns
            .get(id)
            .ok_or_else(|| StoreError::CampaignNotFound(id.to_string()))
    }

    pub fn item(&self, id: &str) -> Result<&Item, StoreError> {
        self.state
            .items
            .get(id)
            .ok_or_else(|| StoreError::ItemNotFound(id.to_string()))
    }

    pub fn create_campaign(&mut self, name: &str) -> Result<Campaign, StoreError> {
        let id = self.next_id("c");
        let created_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.commit(Event::CampaignCreated {
            id: id.clone(),
            name: name.to_string(),
            created_at,
        })?;
        Ok(self.campaign(&id)?.clone())
    }
}

pub fn replay(reader: impl BufRead) -> Result<State, StoreError> {
    let mut state = State::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|source| StoreError::Corrupt { line: i + 1, source })?;
        state.apply(&event).map_err(|_| StoreError::Dangling(i + 1))?;
    }
    Ok(state)
}
