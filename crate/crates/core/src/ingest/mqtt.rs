//! A minimal MQTT 3.1.1 subscriber: CONNECT, SUBSCRIBE at QoS 0, receive
//! PUBLISH, keep-alive PINGREQ. Enough to pull frames off a broker; no TLS,
//! no persistence.

use std::io::{ErrorKind, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

const CONNECT: u8 = 0x10;
const CONNACK: u8 = 0x20;
const PUBLISH: u8 = 0x30;
const PUBACK: u8 = 0x40;
const SUBSCRIBE: u8 = 0x82;
const SUBACK: u8 = 0x90;
const PINGREQ: u8 = 0xC0;
const PINGRESP: u8 = 0xD0;
const DISCONNECT: u8 = 0xE0;

#[derive(Debug, Clone)]
pub struct MqttOptions {
    pub client_id: String,
    pub keep_alive: Duration,
}

impl Default for MqttOptions {
    fn default() -> Self {
        MqttOptions {
            client_id: format!("sirec-{}", std::process::id()),
            keep_alive: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Publish {
    pub topic: String,
    pub payload: Vec<u8>,
}

pub struct MqttClient {
    stream: TcpStream,
    keep_alive: Duration,
    last_sent: Instant,
    next_packet_id: u16,
}

fn proto(msg: impl Into<String>) -> Error {
    Error::Mqtt(msg.into())
}

fn encode_remaining_length(mut len: usize, out: &mut Vec<u8>) -> Result<()> {
    if len > 268_435_455 {
        return Err(proto("packet too large"));
    }
    loop {
        let mut byte = (len % 128) as u8;
        len /= 128;
        if len > 0 {
            byte |= 0x80;
        }
        out.push(byte);
        if len == 0 {
            return Ok(());
        }
    }
}

fn push_str(s: &str, out: &mut Vec<u8>) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| proto("string longer than 65535 bytes"))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn packet(header: u8, body: &[u8]) -> Result<Vec<u8>> {
    let mut out = vec![header];
    encode_remaining_length(body.len(), &mut out)?;
    out.extend_from_slice(body);
    Ok(out)
}

fn timed_out(e: &std::io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

impl MqttClient {
    /// Connects with a clean session and waits for CONNACK.
    pub fn connect(addr: impl ToSocketAddrs, opts: &MqttOptions) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let keep_alive_secs = u16::try_from(opts.keep_alive.as_secs()).unwrap_or(u16::MAX);
        let mut client = MqttClient {
            stream,
            keep_alive: opts.keep_alive,
            last_sent: Instant::now(),
            next_packet_id: 1,
        };
        let mut body = Vec::new();
        push_str("MQTT", &mut body)?;
        body.push(4); // protocol level 3.1.1
        body.push(0x02); // clean session
        body.extend_from_slice(&keep_alive_secs.to_be_bytes());
        push_str(&opts.client_id, &mut body)?;
        client.send(&packet(CONNECT, &body)?)?;

        let (header, body) = client
            .read_packet_blocking()?
            .ok_or_else(|| proto("connection closed before CONNACK"))?;
        if header != CONNACK || body.len() != 2 {
            return Err(proto(format!("expected CONNACK, got packet type 0x{header:02x}")));
        }
        if body[1] != 0 {
            return Err(proto(format!("broker refused connection (code {})", body[1])));
        }
        Ok(client)
    }

    /// Subscribes at QoS 0 and waits for the SUBACK.
    pub fn subscribe(&mut self, topic_filter: &str) -> Result<()> {
        let id = self.next_packet_id;
        self.next_packet_id = self.next_packet_id.wrapping_add(1).max(1);
        let mut body = id.to_be_bytes().to_vec();
        push_str(topic_filter, &mut body)?;
        body.push(0);
        self.send(&packet(SUBSCRIBE, &body)?)?;
        loop {
            let (header, body) = self
                .read_packet_blocking()?
                .ok_or_else(|| proto("connection closed before SUBACK"))?;
            match header & 0xF0 {
                h if h == SUBACK => {
                    if body.len() < 3 || u16::from_be_bytes([body[0], body[1]]) != id {
                        return Err(proto("SUBACK does not match SUBSCRIBE"));
                    }
                    if body[2] == 0x80 {
                        return Err(proto(format!("broker rejected subscription to `{topic_filter}`")));
                    }
                    return Ok(());
                }
                PINGRESP => {}
                other => return Err(proto(format!("unexpected packet 0x{other:02x} while subscribing"))),
            }
        }
    }

    /// Waits for the next PUBLISH, sending PINGREQ when the link is idle.
    /// Returns `None` once the broker closes the connection.
    pub fn next_publish(&mut self) -> Result<Option<Publish>> {
        loop {
            let Some((header, body)) = self.read_packet_with_keepalive()? else {
                return Ok(None);
            };
            match header & 0xF0 {
                PUBLISH => return self.decode_publish(header, body).map(Some),
                PINGRESP => {}
                other => log::debug!("ignoring packet type 0x{other:02x}"),
            }
        }
    }

    pub fn disconnect(mut self) -> Result<()> {
        self.send(&[DISCONNECT, 0])
    }

    fn decode_publish(&mut self, header: u8, body: Vec<u8>) -> Result<Publish> {
        let qos = (header >> 1) & 0x03;
        if body.len() < 2 {
            return Err(proto("short PUBLISH"));
        }
        let tlen = u16::from_be_bytes([body[0], body[1]]) as usize;
        let mut pos = 2 + tlen;
        if body.len() < pos {
            return Err(proto("PUBLISH topic overruns packet"));
        }
        let topic = String::from_utf8(body[2..pos].to_vec()).map_err(|_| proto("topic is not UTF-8"))?;
        match qos {
            0 => {}
            1 => {
                if body.len() < pos + 2 {
                    return Err(proto("PUBLISH missing packet id"));
                }
                let id = [body[pos], body[pos + 1]];
                pos += 2;
                self.send(&[PUBACK, 2, id[0], id[1]])?;
            }
            _ => return Err(proto("QoS 2 delivery is not supported")),
        }
        Ok(Publish {
            topic,
            payload: body[pos..].to_vec(),
        })
    }

    fn send(&mut self, bytes: &[u8]) -> Result<()> {
        self.stream.write_all(bytes)?;
        self.stream.flush()?;
        self.last_sent = Instant::now();
        Ok(())
    }

    fn read_packet_with_keepalive(&mut self) -> Result<Option<(u8, Vec<u8>)>> {
        let tick = (self.keep_alive / 2).max(Duration::from_millis(50));
        self.stream.set_read_timeout(Some(tick))?;
        let mut first = [0u8; 1];
        loop {
            match self.stream.read(&mut first) {
                Ok(0) => return Ok(None),
                Ok(_) => break,
                Err(e) if timed_out(&e) => {
                    if self.last_sent.elapsed() >= tick {
                        self.send(&[PINGREQ, 0])?;
                    }
                }
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) if e.kind() == ErrorKind::ConnectionReset => return Ok(None),
                Err(e) => return Err(e.into()),
            }
        }
        self.stream.set_read_timeout(None)?;
        self.read_rest(first[0]).map(Some)
    }

    fn read_packet_blocking(&mut self) -> Result<Option<(u8, Vec<u8>)>> {
        self.stream.set_read_timeout(None)?;
        let mut first = [0u8; 1];
        match self.stream.read_exact(&mut first) {
            Ok(()) => self.read_rest(first[0]).map(Some),
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn read_rest(&mut self, header: u8) -> Result<(u8, Vec<u8>)> {
        let mut len = 0usize;
        let mut shift = 0;
        loop {
            let mut b = [0u8; 1];
            self.stream.read_exact(&mut b)?;
            len |= ((b[0] & 0x7F) as usize) << shift;
            if b[0] & 0x80 == 0 {
                break;
            }
            shift += 7;
            if shift > 21 {
                return Err(proto("malformed remaining length"));
            }
        }
        let mut body = vec![0u8; len];
        self.stream.read_exact(&mut body)?;
        Ok((header, body))
    }
}
