// Typed client for the label service JSON API. The server is the source of
// truth for all labels; this module never caches mutable state.

export type LabelChoice = 'proton' | 'carbon' | 'other';

export interface NextUnlabeled {
  api_version: number;
  event_id: string;
  index: number;
  remaining: number;
}

export interface LabelRecord {
  api_version: number;
  record_id: string;
  event_id: string;
  label: string | null;
  annotator: string;
  timestamp: number;
  supersedes: string | null;
}

export interface Progress {
  api_version: number;
  total: number;
  unlabeled: number;
  per_class: Record<string, number>;
}

export interface EventPoints {
  api_version: number;
  event_id: string;
  label: string | null;
  points: [number, number, number, number][];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body.detail) detail = JSON.stringify(body.detail);
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  async nextUnlabeled(): Promise<NextUnlabeled | null> {
    const response = await fetch(`${this.baseUrl}/api/events/next-unlabeled`);
    if (response.status === 204) return null;
    return expectJson<NextUnlabeled>(response);
  }

  imageUrl(eventId: string): string {
    return `${this.baseUrl}/api/events/${encodeURIComponent(eventId)}/image.png`;
  }

  async points(eventId: string): Promise<EventPoints> {
    const response = await fetch(
      `${this.baseUrl}/api/events/${encodeURIComponent(eventId)}/points`,
    );
    return expectJson<EventPoints>(response);
  }

  async submitLabel(
    eventId: string,
    label: LabelChoice,
    annotator: string,
  ): Promise<LabelRecord> {
    const response = await fetch(
      `${this.baseUrl}/api/events/${encodeURIComponent(eventId)}/label`,
      {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ label, annotator }),
      },
    );
    return expectJson<LabelRecord>(response);
  }

  async undo(eventId: string): Promise<LabelRecord> {
    const response = await fetch(
      `${this.baseUrl}/api/events/${encodeURIComponent(eventId)}/undo`,
      { method: 'POST' },
    );
    return expectJson<LabelRecord>(response);
  }

  async progress(): Promise<Progress> {
    const response = await fetch(`${this.baseUrl}/api/progress`);
    return expectJson<Progress>(response);
  }

  async exportLabeled(): Promise<string> {
    const response = await fetch(`${this.baseUrl}/api/export`);
    if (!response.ok) throw new ApiError(response.status, response.statusText);
    return response.text();
  }
}
