/** Incremental NDJSON decoding: chunks in, complete parsed records out. */

export class NdjsonParser<T = unknown> {
  private buffer = '';

  /** Feed one chunk; returns every record completed by it. */
  push(chunk: string): T[] {
    this.buffer += chunk;
    const records: T[] = [];
    let newline = this.buffer.indexOf('\n');
    while (newline >= 0) {
      const line = this.buffer.slice(0, newline).trim();
      this.buffer = this.buffer.slice(newline + 1);
      if (line.length > 0) {
        records.push(JSON.parse(line) as T);
      }
      newline = this.buffer.indexOf('\n');
    }
    return records;
  }

  /** Parse whatever remains (a final record without a trailing newline). */
  flush(): T[] {
    const line = this.buffer.trim();
    this.buffer = '';
    return line.length > 0 ? [JSON.parse(line) as T] : [];
  }
}
