//! Links between the master and the worker ranks.
//!
//! Whatever the backend, the master reads from one local inbox. Socket
//! connections get a reader thread each that decodes frames into the inbox
//! and posts [`Inbound::Closed`] when the peer goes away.

use std::io;
use std::net::Shutdown;
use std::os::unix::net::{UnixListener, UnixStream};
use std::thread;

use crossbeam_channel::{unbounded, Receiver, Sender};

use crate::message::{read_frame, write_frame, Message};
use crate::plan::Transport;
use crate::RuntimeError;

#[derive(Debug, Clone)]
pub(crate) enum Inbound {
    Msg(Message),
    Closed { rank: usize, reason: String },
}

enum MasterOut {
    Channels(Vec<Sender<Message>>),
    Sockets(Vec<UnixStream>),
}

pub(crate) struct MasterEnd {
    inbox: Receiver<Inbound>,
    #[cfg_attr(not(test), allow(dead_code))]
    notify: Sender<Inbound>,
    out: MasterOut,
}

enum WorkerLink {
    Channel {
        to_master: Sender<Inbound>,
        from_master: Receiver<Message>,
    },
    Socket(UnixStream),
}

pub(crate) struct WorkerEnd {
    rank: usize,
    link: WorkerLink,
    notify: Sender<Inbound>,
}

/// Connected endpoints; the socket directory lives as long as this does.
pub(crate) struct Links {
    pub master: MasterEnd,
    pub workers: Vec<WorkerEnd>,
    _dir: Option<tempfile::TempDir>,
}

pub(crate) fn connect(kind: Transport, p: usize) -> Result<Links, RuntimeError> {
    match kind {
        Transport::InProcess => Ok(in_process(p)),
        Transport::LocalSocket => local_socket(p),
    }
}

fn in_process(p: usize) -> Links {
    let (inbox_tx, inbox) = unbounded();
    let mut outs = Vec::with_capacity(p);
    let mut workers = Vec::with_capacity(p);
    for rank in 0..p {
        let (tx, rx) = unbounded();
        outs.push(tx);
        workers.push(WorkerEnd {
            rank,
            link: WorkerLink::Channel {
                to_master: inbox_tx.clone(),
                from_master: rx,
            },
            notify: inbox_tx.clone(),
        });
    }
    Links {
        master: MasterEnd {
            inbox,
            notify: inbox_tx,
            out: MasterOut::Channels(outs),
        },
        workers,
        _dir: None,
    }
}

fn local_socket(p: usize) -> Result<Links, RuntimeError> {
    let setup_err = |rank: usize, what: &str, e: io::Error| RuntimeError::Setup {
        rank,
        reason: format!("{what}: {e}"),
    };
    let dir = tempfile::Builder::new()
        .prefix("dls-")
        .tempdir()
        .map_err(|e| setup_err(0, "socket directory", e))?;
    let path = dir.path().join("master.sock");
    let listener = UnixListener::bind(&path).map_err(|e| setup_err(0, "bind", e))?;

    let (inbox_tx, inbox) = unbounded();
    let mut outs = Vec::with_capacity(p);
    let mut workers = Vec::with_capacity(p);
    for rank in 0..p {
        // connect and accept pairwise so the accepted stream is known to
        // belong to `rank`
        let client = UnixStream::connect(&path).map_err(|e| setup_err(rank, "connect", e))?;
        let (server, _) = listener.accept().map_err(|e| setup_err(rank, "accept", e))?;
        let reader = server.try_clone().map_err(|e| setup_err(rank, "clone stream", e))?;
        let tx = inbox_tx.clone();
        thread::Builder::new()
            .name(format!("dls-reader-{rank}"))
            .spawn(move || forward_frames(rank, reader, tx))
            .map_err(|e| setup_err(rank, "spawn reader", e))?;
        outs.push(server);
        workers.push(WorkerEnd {
            rank,
            link: WorkerLink::Socket(client),
            notify: inbox_tx.clone(),
        });
    }
    Ok(Links {
        master: MasterEnd {
            inbox,
            notify: inbox_tx,
            out: MasterOut::Sockets(outs),
        },
        workers,
        _dir: Some(dir),
    })
}

fn forward_frames(rank: usize, mut stream: UnixStream, tx: Sender<Inbound>) {
    loop {
        let next = match read_frame(&mut stream) {
            Ok(Some(m)) => Inbound::Msg(m),
            Ok(None) => Inbound::Closed {
                rank,
                reason: "connection closed".into(),
            },
            Err(e) => Inbound::Closed {
                rank,
                reason: format!("read failed: {e}"),
            },
        };
        let last = matches!(next, Inbound::Closed { .. });
        if tx.send(next).is_err() || last {
            return;
        }
    }
}

impl MasterEnd {
    pub fn recv(&self) -> Result<Inbound, RuntimeError> {
        self.inbox.recv().map_err(|_| RuntimeError::Transport {
            rank: 0,
            reason: "master inbox disconnected".into(),
        })
    }

    pub fn send(&mut self, rank: usize, m: Message) -> Result<(), RuntimeError> {
        let fail = |reason: String| RuntimeError::Transport { rank, reason };
        match &mut self.out {
            MasterOut::Channels(tx) => tx[rank]
                .send(m)
                .map_err(|_| fail("worker channel closed".into())),
            MasterOut::Sockets(s) => write_frame(&mut s[rank], &m).map_err(|e| fail(e.to_string())),
        }
    }

    #[cfg(test)]
    pub fn inject(&self, m: Inbound) {
        let _ = self.notify.send(m);
    }
}

impl WorkerEnd {
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn send(&mut self, m: Message) -> Result<(), RuntimeError> {
        let rank = self.rank;
        match &mut self.link {
            WorkerLink::Channel { to_master, .. } => to_master.send(Inbound::Msg(m)).map_err(|_| {
                RuntimeError::Transport {
                    rank,
                    reason: "master inbox closed".into(),
                }
            }),
            WorkerLink::Socket(s) => write_frame(s, &m).map_err(|e| RuntimeError::Transport {
                rank,
                reason: e.to_string(),
            }),
        }
    }

    pub fn recv(&mut self) -> Result<Message, RuntimeError> {
        let rank = self.rank;
        let fail = |reason: String| RuntimeError::Transport { rank, reason };
        match &mut self.link {
            WorkerLink::Channel { from_master, .. } => {
                from_master.recv().map_err(|_| fail("master channel closed".into()))
            }
            WorkerLink::Socket(s) => match read_frame(s) {
                Ok(Some(m)) => Ok(m),
                Ok(None) => Err(fail("master closed the connection".into())),
                Err(e) => Err(fail(e.to_string())),
            },
        }
    }

    /// Tell the master this rank is gone, as a lost connection would.
    pub fn report_failure(&mut self, reason: String) {
        if let WorkerLink::Socket(s) = &self.link {
            let _ = s.shutdown(Shutdown::Both);
        }
        let _ = self.notify.send(Inbound::Closed {
            rank: self.rank,
            reason,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exchange(kind: Transport) {
        let mut links = connect(kind, 3).unwrap();
        for w in links.workers.iter_mut() {
            w.send(Message::WorkRequest { rank: w.rank() as u32 }).unwrap();
        }
        let mut seen = Vec::new();
        for _ in 0..3 {
            match links.master.recv().unwrap() {
                Inbound::Msg(Message::WorkRequest { rank }) => seen.push(rank),
                other => panic!("{other:?}"),
            }
        }
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
        links
            .master
            .send(
                2,
                Message::WorkAssignment {
                    rank: 2,
                    start: 4,
                    size: 6,
                },
            )
            .unwrap();
        assert_eq!(
            links.workers[2].recv().unwrap(),
            Message::WorkAssignment {
                rank: 2,
                start: 4,
                size: 6
            }
        );
        links.workers[1].report_failure("boom".into());
        match links.master.recv().unwrap() {
            Inbound::Closed { rank, .. } => assert_eq!(rank, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn in_process_exchange() {
        exchange(Transport::InProcess);
    }

    #[test]
    fn socket_exchange() {
        exchange(Transport::LocalSocket);
    }
}
