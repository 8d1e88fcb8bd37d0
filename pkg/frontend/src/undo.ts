// Bounded undo/redo stack of mask snapshots (raw byte copies).

export class UndoStack {
  private undoStack: Uint8Array[] = [];
  private redoStack: Uint8Array[] = [];

  constructor(readonly depth: number = 20) {
    if (depth < 1) throw new Error("undo depth must be >= 1");
  }

  /** Record the state that existed before an edit; clears the redo side. */
  push(snapshot: Uint8Array): void {
    this.undoStack.push(snapshot.slice());
    if (this.undoStack.length > this.depth) {
      this.undoStack.shift();
    }
    this.redoStack = [];
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  /** Exchange the current state for the most recent snapshot. */
  undo(current: Uint8Array): Uint8Array | null {
    const snapshot = this.undoStack.pop();
    if (!snapshot) return null;
    this.redoStack.push(current.slice());
    return snapshot;
  }

  redo(current: Uint8Array): Uint8Array | null {
    const snapshot = this.redoStack.pop();
    if (!snapshot) return null;
    this.undoStack.push(current.slice());
    return snapshot;
  }

  clear(): void {
    this.undoStack = [];
    this.redoStack = [];
  }

  get size(): number {
    return this.undoStack.length;
  }
}
