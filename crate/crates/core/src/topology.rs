//! Transmission schedules for the gossip, ring, and line protocols.
//!
//! A schedule is a single chain: one model token moves from client to
//! client, and event `k`'s sender is always event `k - 1`'s receiver. The
//! first event hands the initial model from [`Sender::Source`].

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sender {
    /// The initial (pretrained) model.
    Source,
    Client(usize),
}

impl std::fmt::Display for Sender {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sender::Source => f.write_str("SOURCE"),
            Sender::Client(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionEvent {
    pub round: usize,
    pub step: usize,
    pub sender: Sender,
    pub receiver: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Gossip,
    Ring,
    Line,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub protocol: Protocol,
    pub seed: Option<u64>,
    pub clients: Vec<usize>,
    pub rounds: usize,
    pub events: Vec<TransmissionEvent>,
}

impl Schedule {
    pub fn events_in_round(&self, round: usize) -> impl Iterator<Item = &TransmissionEvent> {
        self.events.iter().filter(move |e| e.round == round)
    }

    /// Number of events in each round, indexed by round.
    pub fn round_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.rounds];
        for e in &self.events {
            counts[e.round] += 1;
        }
        counts
    }

    pub fn receivers(&self) -> impl Iterator<Item = usize> + '_ {
        self.events.iter().map(|e| e.receiver)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "step", "sender", "receiver"])?;
        for e in &self.events {
            w.write_record([
                e.round.to_string(),
                e.step.to_string(),
                e.sender.to_string(),
                e.receiver.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<schedule csv>", e))?;
        Ok(())
    }
}

fn check_inputs(clients: &[usize], rounds: usize) -> Result<Vec<usize>> {
    let mut sorted = clients.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != clients.len() {
        return Err(Error::config("schedule clients must be distinct"));
    }
    if sorted.len() < 2 {
        return Err(Error::config(format!(
            "a schedule needs at least 2 clients, got {}",
            sorted.len()
        )));
    }
    if rounds == 0 {
        return Err(Error::config("a schedule needs at least 1 round"));
    }
    Ok(sorted)
}

/// Fixed ascending-id order, repeated every round, chained across round
/// boundaries.
pub fn ring_schedule(clients: &[usize], rounds: usize) -> Result<Schedule> {
    let order = check_inputs(clients, rounds)?;
    let mut events = Vec::with_capacity(order.len() * rounds);
    let mut holder = Sender::Source;
    for round in 0..rounds {
        for (step, &receiver) in order.iter().enumerate() {
            events.push(TransmissionEvent {
                round,
                step,
                sender: holder,
                receiver,
            });
            holder = Sender::Client(receiver);
        }
    }
    Ok(Schedule {
        protocol: Protocol::Ring,
        seed: None,
        clients: order,
        rounds,
        events,
    })
}

/// Ring with a single round.
pub fn line_schedule(clients: &[usize]) -> Result<Schedule> {
    let mut s = ring_schedule(clients, 1)?;
    s.protocol = Protocol::Line;
    Ok(s)
}

/// Random walk without self-loops: `|clients|` events per round, the first
/// receiver uniform over all clients and every later receiver uniform over
/// the clients other than the current holder.
pub fn gossip_schedule(clients: &[usize], rounds: usize, seed: u64) -> Result<Schedule> {
    let pool = check_inputs(clients, rounds)?;
    let n = pool.len();
    let mut rng = rng_for(seed, &[stream::SCHEDULE]);
    let mut events = Vec::with_capacity(n * rounds);
    let mut holder: Option<usize> = None;
    for round in 0..rounds {
        for step in 0..n {
            let idx = match holder {
                None => rng.gen_range(0..n),
                Some(h) => {
                    let k = rng.gen_range(0..n - 1);
                    if k >= h {
                        k + 1
                    } else {
                        k
                    }
                }
            };
            events.push(TransmissionEvent {
                round,
                step,
                sender: holder.map_or(Sender::Source, |h| Sender::Client(pool[h])),
                receiver: pool[idx],
            });
            holder = Some(idx);
        }
    }
    Ok(Schedule {
        protocol: Protocol::Gossip,
        seed: Some(seed),
        clients: pool,
        rounds,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_one_round() {
        let s = ring_schedule(&[0, 1, 2], 1).unwrap();
        let recv: Vec<_> = s.receivers().collect();
        assert_eq!(recv, vec![0, 1, 2]);
        let send: Vec<_> = s.events.iter().map(|e| e.sender).collect();
        assert_eq!(
            send,
            vec![Sender::Source, Sender::Client(0), Sender::Client(1)]
        );
    }

    #[test]
    fn ring_chain_continues_across_rounds() {
        let s = ring_schedule(&[2, 0, 1], 2).unwrap();
        let second: Vec<_> = s.events_in_round(1).collect();
        assert_eq!(
            second.iter().map(|e| e.receiver).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_eq!(second[0].sender, Sender::Client(2));
    }

    #[test]
    fn line_equals_single_round_ring() {
        let line = line_schedule(&[0, 1, 2]).unwrap();
        let ring = ring_schedule(&[0, 1, 2], 1).unwrap();
        assert_eq!(line.events, ring.events);
        assert_eq!(line.events.len(), 3);
        assert_eq!(line.protocol, Protocol::Line);
    }

    #[test]
    fn two_client_gossip_alternates() {
        for seed in 0..20 {
            let s = gossip_schedule(&[0, 1], 4, seed).unwrap();
            let r: Vec<_> = s.receivers().collect();
            assert!(r.windows(2).all(|w| w[0] != w[1]), "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn gossip_is_seeded() {
        let a = gossip_schedule(&[0, 1, 2], 5, 42).unwrap();
        let b = gossip_schedule(&[0, 1, 2], 5, 42).unwrap();
        assert_eq!(a, b);
        let c = gossip_schedule(&[0, 1, 2], 5, 43).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn gossip_receive_counts_near_uniform() {
        let clients: Vec<usize> = (0..10).collect();
        let s = gossip_schedule(&clients, 100, 7).unwrap();
        let mut counts = [0usize; 10];
        for r in s.receivers() {
            counts[r] += 1;
        }
        for c in counts {
            assert!((80..=120).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn too_few_clients_rejected() {
        assert!(ring_schedule(&[0], 1).is_err());
        assert!(gossip_schedule(&[0], 1, 0).is_err());
        assert!(ring_schedule(&[0, 1], 0).is_err());
        assert!(ring_schedule(&[0, 0], 1).is_err());
    }

    #[test]
    fn csv_export() {
        let s = ring_schedule(&[0, 1], 1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "round,step,sender,receiver\n0,0,SOURCE,0\n0,1,0,1\n");
    }
}
