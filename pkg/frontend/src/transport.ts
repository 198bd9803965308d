/** Message transport boundary; swapped for a scripted fake in tests. */

export interface Transport {
  send(text: string): void;
  onMessage(cb: (text: string) => void): void;
  onClose(cb: () => void): void;
  close(): void;
}

export class WebSocketTransport implements Transport {
  private socket: WebSocket;
  private messageCb: ((text: string) => void) | null = null;
  private closeCb: (() => void) | null = null;
  private backlog: string[] = [];
  private ready = false;
  private sendQueue: string[] = [];

  constructor(url: string) {
    this.socket = new WebSocket(url);
    this.socket.addEventListener("open", () => {
      this.ready = true;
      for (const text of this.sendQueue) {
        this.socket.send(text);
      }
      this.sendQueue.length = 0;
    });
    this.socket.addEventListener("message", (event) => {
      const text = String(event.data);
      if (this.messageCb) {
        this.messageCb(text);
      } else {
        this.backlog.push(text);
      }
    });
    this.socket.addEventListener("close", () => {
      this.closeCb?.();
    });
  }

  send(text: string): void {
    if (this.ready) {
      this.socket.send(text);
    } else {
      this.sendQueue.push(text);
    }
  }

  onMessage(cb: (text: string) => void): void {
    this.messageCb = cb;
    for (const text of this.backlog) {
      cb(text);
    }
    this.backlog.length = 0;
  }

  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.socket.close();
  }
}
