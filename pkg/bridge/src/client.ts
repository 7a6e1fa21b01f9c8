/** Blocking REQ/REP client: write one frame, await the 1-byte REP before the
 * next send. On REP timeout the client reconnects and the caller moves on to
 * its newest frame; sequence numbering is the caller's and simply resumes. */

import * as net from "node:net";

import { REP_BYTE } from "./framing.js";

export interface ClientOptions {
  repTimeoutMs?: number;
  connectTimeoutMs?: number;
}

export class ReqRepClient {
  private socket: net.Socket | null = null;
  private readonly repTimeoutMs: number;
  private readonly connectTimeoutMs: number;
  reconnects = 0;
  repTimeouts = 0;
  private inFlight = false;

  constructor(
    private readonly host: string,
    private readonly port: number,
    options: ClientOptions = {},
  ) {
    this.repTimeoutMs = options.repTimeoutMs ?? 5000;
    this.connectTimeoutMs = options.connectTimeoutMs ?? 5000;
  }

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host: this.host, port: this.port });
      const timer = setTimeout(() => {
        socket.destroy();
        reject(new Error(`connect to ${this.host}:${this.port} timed out`));
      }, this.connectTimeoutMs);
      socket.once("connect", () => {
        clearTimeout(timer);
        socket.setNoDelay(true);
        this.socket = socket;
        resolve();
      });
      socket.once("error", (err) => {
        clearTimeout(timer);
        reject(err);
      });
    });
  }

  private async reconnect(): Promise<void> {
    this.destroySocket();
    this.reconnects++;
    await this.connect();
  }

  private destroySocket(): void {
    if (this.socket) {
      this.socket.removeAllListeners();
      this.socket.destroy();
      this.socket = null;
    }
  }

  /** Send one frame; resolves true on REP, false after a timeout+reconnect. */
  async send(frame: Buffer): Promise<boolean> {
    if (this.inFlight) {
      throw new Error("send() called while a frame is still unacknowledged");
    }
    this.inFlight = true;
    try {
      if (!this.socket) await this.connect();
      const socket = this.socket!;
      const acked = await new Promise<boolean>((resolve, reject) => {
        const cleanup = () => {
          clearTimeout(timer);
          socket.removeListener("data", onData);
          socket.removeListener("error", onError);
          socket.removeListener("close", onClose);
        };
        const timer = setTimeout(() => {
          cleanup();
          this.repTimeouts++;
          resolve(false);
        }, this.repTimeoutMs);
        const onData = (data: Buffer) => {
          cleanup();
          if (data[0] !== REP_BYTE) {
            reject(new Error(`unexpected REP byte 0x${data[0].toString(16)}`));
            return;
          }
          resolve(true);
        };
        const onError = () => {
          cleanup();
          resolve(false);
        };
        const onClose = () => {
          cleanup();
          resolve(false);
        };
        socket.on("data", onData);
        socket.on("error", onError);
        socket.on("close", onClose);
        socket.write(frame);
      });
      if (!acked) {
        await this.reconnect().catch(() => {
          this.socket = null;
        });
      }
      return acked;
    } finally {
      this.inFlight = false;
    }
  }

  close(): void {
    this.destroySocket();
  }
}
