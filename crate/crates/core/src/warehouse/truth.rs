use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::{stream, Stream};

use super::{BoxType, SlotAddress, WarehouseSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Occupant {
    pub barcode_id: String,
    pub box_type: BoxType,
}

/// The simulated physical warehouse. Only sensor models read it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    occupancy: BTreeMap<SlotAddress, Occupant>,
    clutter: BTreeSet<SlotAddress>,
}

impl GroundTruth {
    /// Populates slots according to `spec.stock`, deterministically in
    /// `(spec, seed)`.
    pub fn generate(spec: &WarehouseSpec, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::Stock);
        let mut truth = Self::default();
        let mut serial = 0u32;
        for addr in spec.addresses() {
            let roll: f64 = rng.random();
            let pick = rng.random_range(0..spec.box_catalog.len().max(1));
            if roll < spec.stock.occupancy {
                serial += 1;
                let box_type = spec.box_catalog[pick].clone();
                truth.place(addr, barcode_for(seed, serial), box_type);
            } else if roll < spec.stock.occupancy + (1.0 - spec.stock.occupancy) * spec.stock.clutter {
                truth.clutter.insert(addr);
            }
        }
        truth
    }

    /// Exactly `count` labeled pallets on distinct slots chosen by `seed`.
    pub fn with_count(spec: &WarehouseSpec, count: usize, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::Stock);
        let mut all: Vec<SlotAddress> = spec.addresses().collect();
        all.shuffle(&mut rng);
        let mut truth = Self::default();
        for (i, addr) in all.into_iter().take(count).enumerate() {
            let box_type = spec.box_catalog[i % spec.box_catalog.len()].clone();
            truth.place(addr, barcode_for(seed, i as u32 + 1), box_type);
        }
        truth
    }

    pub fn place(&mut self, addr: SlotAddress, barcode_id: impl Into<String>, box_type: BoxType) {
        let barcode_id = barcode_id.into();
        self.clutter.remove(&addr);
        self.occupancy.retain(|_, o| o.barcode_id != barcode_id);
        self.occupancy.insert(addr, Occupant { barcode_id, box_type });
    }

    pub fn add_clutter(&mut self, addr: SlotAddress) {
        if !self.occupancy.contains_key(&addr) {
            self.clutter.insert(addr);
        }
    }

    /// Moves a labeled pallet to another slot. Returns false if the tag is
    /// unknown or the destination is taken.
    pub fn move_tag(&mut self, barcode_id: &str, to: SlotAddress) -> bool {
        if self.occupancy.contains_key(&to) {
            return false;
        }
        let Some(from) = self.locate(barcode_id) else {
            return false;
        };
        let occ = self.occupancy.remove(&from).expect("located");
        self.clutter.remove(&to);
        self.occupancy.insert(to, occ);
        true
    }

    pub fn occupant(&self, addr: &SlotAddress) -> Option<&Occupant> {
        self.occupancy.get(addr)
    }

    pub fn occupancy(&self) -> &BTreeMap<SlotAddress, Occupant> {
        &self.occupancy
    }

    pub fn clutter(&self) -> &BTreeSet<SlotAddress> {
        &self.clutter
    }

    pub fn locate(&self, barcode_id: &str) -> Option<SlotAddress> {
        self.occupancy
            .iter()
            .find(|(_, o)| o.barcode_id == barcode_id)
            .map(|(a, _)| *a)
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.len()
    }
}

fn barcode_for(seed: u64, serial: u32) -> String {
    format!("PLT-{:04X}-{serial:06}", (seed & 0xFFFF) as u16)
}
