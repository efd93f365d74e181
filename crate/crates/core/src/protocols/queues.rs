use std::collections::VecDeque;

use crate::traffic::Packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferDiscipline {
    /// Single FIFO shared by all destinations (CDP, SRCR).
    Fifo,
    /// One virtual queue per destination (BP, E-BP).
    PerDestination,
}

/// Routing-layer packet buffer of one node with a shared capacity.
#[derive(Debug, Clone)]
pub struct PacketBuffer {
    discipline: BufferDiscipline,
    capacity: usize,
    fifo: VecDeque<Packet>,
    per_dest: Vec<VecDeque<Packet>>,
    backlog: Vec<usize>,
    len: usize,
}

impl PacketBuffer {
    pub fn new(discipline: BufferDiscipline, nodes: usize, capacity: usize) -> Self {
        Self {
            discipline,
            capacity,
            fifo: VecDeque::new(),
            per_dest: vec![VecDeque::new(); if discipline == BufferDiscipline::PerDestination { nodes } else { 0 }],
            backlog: vec![0; nodes],
            len: 0,
        }
    }

    pub fn discipline(&self) -> BufferDiscipline {
        self.discipline
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Enqueues, handing the packet back if the buffer is full.
    pub fn push(&mut self, packet: Packet) -> Result<(), Packet> {
        if self.len >= self.capacity {
            return Err(packet);
        }
        self.backlog[packet.dst] += 1;
        self.len += 1;
        match self.discipline {
            BufferDiscipline::Fifo => self.fifo.push_back(packet),
            BufferDiscipline::PerDestination => self.per_dest[packet.dst].push_back(packet),
        }
        Ok(())
    }

    pub fn backlog(&self, dest: usize) -> usize {
        self.backlog[dest]
    }

    /// `(destination, count)` for every non-empty destination, ascending.
    pub fn backlogs(&self) -> Vec<(usize, usize)> {
        self.backlog.iter().enumerate().filter(|(_, q)| **q > 0).map(|(d, q)| (d, *q)).collect()
    }

    pub fn head(&self) -> Option<&Packet> {
        match self.discipline {
            BufferDiscipline::Fifo => self.fifo.front(),
            BufferDiscipline::PerDestination => self.per_dest.iter().find_map(|q| q.front()),
        }
    }

    /// FIFO head (or, for virtual queues, the head of the lowest destination).
    pub fn pop_head(&mut self) -> Option<Packet> {
        let p = match self.discipline {
            BufferDiscipline::Fifo => self.fifo.pop_front(),
            BufferDiscipline::PerDestination => self.per_dest.iter_mut().find_map(|q| q.pop_front()),
        }?;
        self.account_pop(&p);
        Some(p)
    }

    /// Head of the queue for `dest` (virtual queues), or the first packet
    /// for `dest` in FIFO order.
    pub fn pop_for(&mut self, dest: usize) -> Option<Packet> {
        let p = match self.discipline {
            BufferDiscipline::PerDestination => self.per_dest[dest].pop_front(),
            BufferDiscipline::Fifo => {
                let i = self.fifo.iter().position(|p| p.dst == dest)?;
                self.fifo.remove(i)
            }
        }?;
        self.account_pop(&p);
        Some(p)
    }

    fn account_pop(&mut self, p: &Packet) {
        self.backlog[p.dst] -= 1;
        self.len -= 1;
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = &Packet> + '_> {
        match self.discipline {
            BufferDiscipline::Fifo => Box::new(self.fifo.iter()),
            BufferDiscipline::PerDestination => Box::new(self.per_dest.iter().flatten()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimTime;

    fn pkt(seq: u64, dst: usize) -> Packet {
        Packet { flow: 0, seq, src: 0, dst, ttl: 32, created_at: SimTime::ZERO, path_tag: None, size: 512, hops: 0 }
    }

    #[test]
    fn fifo_order_and_overflow() {
        let mut b = PacketBuffer::new(BufferDiscipline::Fifo, 4, 3);
        for (s, d) in [(0, 2), (1, 3), (2, 2)] {
            b.push(pkt(s, d)).unwrap();
        }
        assert_eq!(b.push(pkt(3, 1)).unwrap_err().seq, 3);
        assert_eq!(b.backlogs(), vec![(2, 2), (3, 1)]);
        assert_eq!(b.pop_head().unwrap().seq, 0);
        assert_eq!(b.pop_head().unwrap().seq, 1);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn virtual_queues_share_capacity() {
        let mut b = PacketBuffer::new(BufferDiscipline::PerDestination, 4, 3);
        b.push(pkt(0, 3)).unwrap();
        b.push(pkt(1, 1)).unwrap();
        b.push(pkt(2, 3)).unwrap();
        assert!(b.push(pkt(3, 2)).is_err());
        assert_eq!(b.pop_for(3).unwrap().seq, 0);
        assert_eq!(b.pop_for(2), None);
        assert_eq!(b.backlog(3), 1);
        assert_eq!(b.iter().count(), 2);
    }
}
