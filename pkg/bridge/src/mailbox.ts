/** Single-slot overwrite mailbox between capture and send: the sender always
 * gets the newest frame, frames overwritten while the line is busy are lost
 * by design. */

export class LatestSlot<T> {
  private item: T | undefined;
  private waiter: ((value: T | undefined) => void) | null = null;
  private closed = false;
  overwritten = 0;

  put(item: T): void {
    if (this.closed) return;
    if (this.waiter) {
      const resolve = this.waiter;
      this.waiter = null;
      resolve(item);
      return;
    }
    if (this.item !== undefined) this.overwritten++;
    this.item = item;
  }

  /** Resolves with the newest item, or undefined once closed and drained. */
  take(): Promise<T | undefined> {
    if (this.item !== undefined) {
      const item = this.item;
      this.item = undefined;
      return Promise.resolve(item);
    }
    if (this.closed) return Promise.resolve(undefined);
    return new Promise((resolve) => {
      this.waiter = resolve;
    });
  }

  close(): void {
    this.closed = true;
    if (this.waiter) {
      const resolve = this.waiter;
      this.waiter = null;
      resolve(undefined);
    }
  }
}
