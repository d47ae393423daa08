// Labeling session orchestration: queue advance, optimistic submit with
// rollback, and undo of the most recent submissions. All state that matters
// lives on the server; this controller mirrors it for the view.

import type { ApiClient, LabelChoice, NextUnlabeled, Progress } from './api.js';

export interface SessionState {
  annotator: string;
  current: NextUnlabeled | null;
  done: boolean;
  progress: Progress | null;
  history: string[]; // event ids of live (not yet undone) submissions
  error: string | null;
  busy: boolean;
}

type Listener = (state: SessionState) => void;

export class SessionController {
  private state: SessionState;
  private listeners: Listener[] = [];

  constructor(
    private readonly client: Pick<
      ApiClient,
      'nextUnlabeled' | 'submitLabel' | 'undo' | 'progress'
    >,
    annotator: string,
  ) {
    this.state = {
      annotator,
      current: null,
      done: false,
      progress: null,
      history: [],
      error: null,
      busy: false,
    };
  }

  getState(): SessionState {
    return { ...this.state, history: [...this.state.history] };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(partial: Partial<SessionState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.getState());
  }

  get canUndo(): boolean {
    return this.state.history.length > 0;
  }

  async refresh(): Promise<void> {
    const [next, progress] = await Promise.all([
      this.client.nextUnlabeled(),
      this.client.progress(),
    ]);
    this.update({ current: next, done: next === null, progress, error: null });
  }

  async fetchNext(): Promise<void> {
    this.update({ busy: true });
    try {
      await this.refresh();
    } finally {
      this.update({ busy: false });
    }
  }

  async submitLabel(choice: LabelChoice): Promise<void> {
    const current = this.state.current;
    if (!current || this.state.busy) return;
    this.update({ busy: true, error: null });
    try {
      await this.client.submitLabel(current.event_id, choice, this.state.annotator);
      this.state.history.push(current.event_id);
      await this.refresh();
    } catch (err) {
      // no advance on error; the event stays on screen
      this.update({ error: err instanceof Error ? err.message : String(err) });
    } finally {
      this.update({ busy: false });
    }
  }

  async undoLast(): Promise<void> {
    if (!this.canUndo || this.state.busy) return;
    const eventId = this.state.history[this.state.history.length - 1];
    this.update({ busy: true, error: null });
    try {
      await this.client.undo(eventId);
      this.state.history.pop();
      await this.refresh();
    } catch (err) {
      this.update({ error: err instanceof Error ? err.message : String(err) });
    } finally {
      this.update({ busy: false });
    }
  }
}
